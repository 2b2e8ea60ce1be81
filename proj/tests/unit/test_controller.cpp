#include <doctest.h>

#include <cmath>
#include <numbers>

#include "handjog/controller.hpp"
#include "handjog/error.hpp"
#include "handjog/safety.hpp"

using namespace handjog;

namespace {

GestureEvent ev(Gesture g, double conf = 0.9) { return {static_cast<int>(g), conf}; }

// Feeds one event per 10 ms tick and collects what the controller emits.
struct Driver {
    ControllerConfig config;
    ControllerState state;
    std::int64_t now = 0;
    std::vector<std::pair<std::int64_t, JogCommand>> emitted;

    std::optional<JogCommand> tick(const std::optional<GestureEvent>& e) {
        auto u = update(state, e, now, config);
        state = u.state;
        if (u.command) emitted.emplace_back(now, *u.command);
        now += 10;
        return u.command;
    }
};

}  // namespace

TEST_CASE("default gesture table") {
    ControllerConfig c;
    CHECK(map_gesture(0, c) == CommandIntent::gripper(GripperAction::close));
    CHECK(map_gesture(1, c) == CommandIntent::gripper(GripperAction::open));
    CHECK(map_gesture(2, c) == CommandIntent::jog(Axis::z, +1));
    CHECK(map_gesture(3, c) == CommandIntent::jog(Axis::z, -1));
    CHECK(map_gesture(4, c) == CommandIntent::jog(Axis::y, -1));
    CHECK(map_gesture(5, c) == CommandIntent::jog(Axis::y, +1));
    CHECK(map_gesture(6, c) == CommandIntent::jog(Axis::x, -1));
    CHECK(map_gesture(7, c) == CommandIntent::jog(Axis::x, +1));
    CHECK_THROWS_AS(map_gesture(8, c), ValidationError);
}

TEST_CASE("gesture map file overlays the table") {
    ControllerConfig c;
    c.gesture_map = parse_gesture_map("# swap\n2 = jog x +\nPointDown = grip close\n\n");
    CHECK(map_gesture(2, c) == CommandIntent::jog(Axis::x, +1));
    CHECK(map_gesture(3, c) == CommandIntent::gripper(GripperAction::close));
    CHECK(map_gesture(4, c) == CommandIntent::jog(Axis::y, -1));
    CHECK(parse_gesture_map(format_gesture_map(c.gesture_map)) == c.gesture_map);

    auto message_of = [](std::string_view text) {
        try {
            parse_gesture_map(text);
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message_of("2 = jog z +\n9 = jog z +\n").find("line 2") != std::string::npos);
    CHECK(message_of("2 = jog w +\n").find("line 1") != std::string::npos);
    CHECK(message_of("\n\n2 = jog z +\n2 = none\n").find("line 4") != std::string::npos);
    CHECK(message_of("2 jog z +\n").find("line 1") != std::string::npos);
}

TEST_CASE("intent text round trip") {
    for (const auto& i : default_gesture_map()) CHECK(parse_intent(format_intent(i)) == i);
    CHECK(parse_intent("none") == CommandIntent::none());
    CHECK_FALSE(parse_intent("jog z").has_value());
    CHECK_FALSE(parse_intent("grip shut").has_value());
}

TEST_CASE("three PointUp events activate the upward jog") {
    Driver d;
    CHECK_FALSE(d.tick(ev(Gesture::PointUp)).has_value());
    CHECK_FALSE(d.tick(ev(Gesture::PointUp)).has_value());
    const auto cmd = d.tick(ev(Gesture::PointUp));
    REQUIRE(cmd.has_value());
    CHECK(cmd->linear_velocity == std::array<double, 3>{0.0, 0.0, 0.05});
    CHECK_FALSE(cmd->gripper_action.has_value());
    CHECK(d.state.active == CommandIntent::jog(Axis::z, +1));

    // Continuous: every following tick emits the same jog.
    for (int i = 0; i < 5; ++i) {
        const auto again = d.tick(ev(Gesture::PointUp));
        REQUIRE(again.has_value());
        CHECK(again->linear_velocity[2] == 0.05);
    }
}

TEST_CASE("silence past the timeout stops exactly once") {
    Driver d;
    for (int i = 0; i < 3; ++i) d.tick(ev(Gesture::PointUp));
    const std::int64_t last_event = d.now - 10;
    std::size_t stops = 0;
    std::int64_t stop_at = -1;
    for (int i = 0; i < 100; ++i) {
        const auto c = d.tick(std::nullopt);
        if (c && c->is_stop()) {
            ++stops;
            stop_at = c->stamp_ms;
        }
    }
    CHECK(stops == 1);
    CHECK(stop_at - last_event > 300);
    CHECK(stop_at - last_event <= 310);
    CHECK(d.state.active == CommandIntent::none());
    // Jogging continues up to the timeout.
    for (const auto& [t, c] : d.emitted) {
        if (t < stop_at) CHECK(c.linear_velocity[2] == 0.05);
    }
}

TEST_CASE("alternating labels never activate") {
    Driver d;
    for (int i = 0; i < 50; ++i) CHECK_FALSE(d.tick(ev(i % 2 ? Gesture::PointUp : Gesture::PointDown)).has_value());
    CHECK(d.state.active == CommandIntent::none());
}

TEST_CASE("low confidence counts as no gesture") {
    Driver d;
    for (int i = 0; i < 10; ++i) CHECK_FALSE(d.tick(ev(Gesture::PointUp, 0.79)).has_value());
    CHECK(d.tick(ev(Gesture::PointUp, 0.8)) == std::nullopt);
}

TEST_CASE("gripper intent emits a single action") {
    Driver d;
    std::size_t actions = 0;
    for (int i = 0; i < 30; ++i) {
        const auto c = d.tick(ev(Gesture::Fist));
        if (c) {
            CHECK(c->is_stop());
            CHECK(c->gripper_action == GripperAction::close);
            ++actions;
        }
    }
    CHECK(actions == 1);
    CHECK(d.state.gripper == GripperState::closed);
}

TEST_CASE("switching jog axis needs a fresh debounce") {
    Driver d;
    for (int i = 0; i < 3; ++i) d.tick(ev(Gesture::PointUp));
    // The old jog keeps running while the new label debounces.
    auto c = d.tick(ev(Gesture::PointLeft));
    REQUIRE(c.has_value());
    CHECK(c->linear_velocity[2] == 0.05);
    d.tick(ev(Gesture::PointLeft));
    c = d.tick(ev(Gesture::PointLeft));
    REQUIRE(c.has_value());
    CHECK(c->linear_velocity == std::array<double, 3>{0.0, -0.05, 0.0});
}

TEST_CASE("remapped table drives the command") {
    Driver d;
    d.config.gesture_map = parse_gesture_map("2 = jog x -\n");
    d.config.debounce_frames = 1;
    const auto c = d.tick(ev(Gesture::PointUp));
    REQUIRE(c.has_value());
    CHECK(c->linear_velocity == std::array<double, 3>{-0.05, 0.0, 0.0});
}

TEST_CASE("update is deterministic and rejects time regression") {
    Rng rng(8);
    std::vector<std::optional<GestureEvent>> events;
    for (int i = 0; i < 500; ++i) {
        if (rng.uniform() < 0.2) events.push_back(std::nullopt);
        else events.push_back(GestureEvent{static_cast<int>(rng.index(3)) + 2, rng.uniform(0.5, 1.0)});
    }
    Driver a, b;
    for (const auto& e : events) {
        a.tick(e);
        b.tick(e);
    }
    CHECK(a.emitted == b.emitted);
    CHECK(a.state == b.state);

    ControllerState s = update({}, std::nullopt, 100, ControllerConfig{}).state;
    CHECK_THROWS_AS(update(s, std::nullopt, 99, ControllerConfig{}), ValidationError);
}

TEST_CASE("debounce counter stays within N") {
    Driver d;
    for (int i = 0; i < 20; ++i) {
        d.tick(ev(Gesture::PointDown));
        CHECK(d.state.consecutive <= d.config.debounce_frames);
    }
}

TEST_CASE("controller config validation") {
    ControllerConfig c;
    c.debounce_frames = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.jog_speed = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.confidence_threshold = 1.1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

// ---- safety envelope ----

TEST_CASE("shoulder lift clamp") {
    const auto env = SafetyEnvelope::defaults();
    Joints q{0, -200, 0, 0, 0, 0};
    auto r = clamp_joint_targets(q, env);
    CHECK(r.q[1] == -183.0);
    CHECK(r.clamped);
    q[1] = -100;
    r = clamp_joint_targets(q, env);
    CHECK(r.q[1] == -100.0);
    CHECK_FALSE(r.clamped);
    q[1] = 0;
    r = clamp_joint_targets(q, env);
    CHECK(r.q[1] == -13.0);
    CHECK(r.clamped);
}

TEST_CASE("radian clamp lands inside the degree limits") {
    const auto env = SafetyEnvelope::defaults();
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        Joints q{};
        for (auto& v : q) v = rng.uniform(-8.0, 8.0);
        const auto r = clamp_joint_radians(q, env);
        CHECK(within_joint_limits(r.q, env));
        CHECK(rad_to_deg(r.q[1]) >= -183.0);
        CHECK(rad_to_deg(r.q[1]) <= -13.0);
    }
}

TEST_CASE("speed scaling keeps direction and hits the cap") {
    const auto env = SafetyEnvelope::defaults();
    const auto s = scale_joint_speed(Joints{1.0, 0, 0, 0, 0, 0}, env);
    CHECK(s[0] == doctest::Approx(0.2 * std::numbers::pi).epsilon(1e-12));
    CHECK(s[0] == doctest::Approx(0.62832).epsilon(1e-5));

    const Joints inside{0.1, -0.2, 0.3, 0, 0, 0.6};
    CHECK(scale_joint_speed(inside, env) == inside);
    CHECK(scale_joint_speed(Joints{}, env) == Joints{});

    const Joints mixed{2.0, -1.0, 0.5, 0, 0, 0};
    const auto m = scale_joint_speed(mixed, env);
    CHECK(m[0] == doctest::Approx(0.2 * std::numbers::pi));
    for (std::size_t j = 1; j < 3; ++j) CHECK(m[j] / mixed[j] == doctest::Approx(m[0] / mixed[0]));
    CHECK(within_speed_limits(m, env));
}

TEST_CASE("payload cap is inclusive") {
    const auto env = SafetyEnvelope::defaults();
    CHECK(check_payload(0.5, env).accepted);
    CHECK(check_payload(1.0, env).accepted);
    const auto heavy = check_payload(1.2, env);
    CHECK_FALSE(heavy.accepted);
    CHECK(heavy.reasons == std::vector<SafetyReason>{SafetyReason::payload});
    CHECK_THROWS_AS(check_payload(-0.1, env), ValidationError);
}

TEST_CASE("validate_jog composition") {
    const auto env = SafetyEnvelope::defaults();
    const double dt = 0.01;
    JogCommand cmd;
    cmd.linear_velocity = {0, 0, -0.05};

    SUBCASE("heavy payload stops everything") {
        const VelocityResolver any = [](const Vec3&, const Joints&) { return Joints{0.1, 0.1, 0, 0, 0, 0}; };
        const auto r = validate_jog(cmd, Joints{0, deg_to_rad(-90), 0, 0, 0, 0}, 2.0, env, any, dt);
        CHECK_FALSE(r.verdict.accepted);
        CHECK(r.verdict.reasons == std::vector<SafetyReason>{SafetyReason::payload});
        CHECK(r.qdot == Joints{});
    }
    SUBCASE("predicted shoulder overrun is zeroed") {
        const Joints q{0, deg_to_rad(-182.9), 0, 0, 0, 0};
        const VelocityResolver down = [](const Vec3&, const Joints&) { return Joints{0, -0.5, 0, 0, 0, 0}; };
        // Oracle: one explicit Euler step from q.
        REQUIRE(rad_to_deg(q[1] + (-0.5) * dt) < -183.0);
        const auto r = validate_jog(cmd, q, 0.0, env, down, dt);
        CHECK_FALSE(r.verdict.accepted);
        CHECK(r.verdict.has(SafetyReason::joint_limit));
        CHECK(r.qdot == Joints{});
    }
    SUBCASE("benign jog passes through") {
        const Joints q{0, deg_to_rad(-90), deg_to_rad(90), 0, 0, 0};
        const Joints rate{0.01, -0.02, 0.03, 0, 0, 0};
        const VelocityResolver fixed = [&](const Vec3&, const Joints&) { return rate; };
        const auto r = validate_jog(cmd, q, 0.5, env, fixed, dt);
        CHECK(r.verdict.accepted);
        CHECK_FALSE(r.verdict.clamped);
        CHECK(r.verdict.reasons.empty());
        CHECK(r.qdot == rate);
    }
    SUBCASE("fast resolution is scaled, not rejected") {
        const VelocityResolver fast = [](const Vec3&, const Joints&) { return Joints{3.0, 0, 0, 0, 0, 0}; };
        const auto r = validate_jog(cmd, Joints{0, deg_to_rad(-90), 0, 0, 0, 0}, 0.0, env, fast, dt);
        CHECK(r.verdict.accepted);
        CHECK(r.verdict.has(SafetyReason::speed_limit));
        CHECK(r.qdot[0] == doctest::Approx(0.2 * std::numbers::pi));
    }
}

TEST_CASE("envelope validation") {
    auto env = SafetyEnvelope::defaults();
    CHECK_NOTHROW(env.validate());
    env.speed_fraction = 0.0;
    CHECK_THROWS_AS(env.validate(), ValidationError);
    env = SafetyEnvelope::defaults();
    env.joint_limits[1] = {-13.0, -183.0};
    CHECK_THROWS_AS(env.validate(), ValidationError);
    env = SafetyEnvelope::defaults();
    env.payload_cap = 0.0;
    CHECK_THROWS_AS(env.validate(), ValidationError);
}
