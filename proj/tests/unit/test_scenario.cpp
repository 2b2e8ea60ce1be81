#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "handjog/error.hpp"
#include "handjog/scenario.hpp"

using namespace handjog;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_scenario(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

StateRecord record(std::int64_t t, Vec3 ee, GripperState g) {
    StateRecord r;
    r.t_ms = t;
    r.q = home_joints();
    r.ee = ee;
    r.gripper = g;
    return r;
}

}  // namespace

TEST_CASE("scenario text round trip") {
    for (const auto& s : {canonical_pick_place(), limit_seek()}) {
        const auto back = parse_scenario(format_scenario(s));
        CHECK(back.name == s.name);
        CHECK(back.input == s.input);
        CHECK(back.duration_ms == s.duration_ms);
        CHECK(back.entries == s.entries);
        CHECK(back.goals == s.goals);
        for (std::size_t j = 0; j < kJointCount; ++j) CHECK(back.start_q[j] == doctest::Approx(s.start_q[j]));
    }
}

TEST_CASE("shipped scenario files match the built-ins") {
    const std::filesystem::path dir = std::filesystem::path(HANDJOG_ASSET_DIR) / "scenarios";
    const auto pp = load_scenario(dir / "pick-place.txt");
    CHECK(pp.entries == canonical_pick_place().entries);
    CHECK(pp.goals == canonical_pick_place().goals);
    CHECK(pp.duration_ms == canonical_pick_place().duration_ms);
    const auto ls = load_scenario(dir / "limit-seek.txt");
    CHECK(ls.entries == limit_seek().entries);
    CHECK(ls.input == InputMode::holds);
}

TEST_CASE("scenario parse errors name the line") {
    CHECK(error_of("at 100 PointUp\nat 50 none\n").find("line 2") != std::string::npos);
    CHECK(error_of("\n\nwiggle 3\n").find("line 3") != std::string::npos);
    CHECK(error_of("at 0 Wave\n").find("line 1") != std::string::npos);
    CHECK(error_of("input both\n").find("line 1") != std::string::npos);
    CHECK(error_of("goal_rel 0 0 0 -1 open\n").find("line 1") != std::string::npos);
    CHECK(error_of("at 0 PointUp extra\n").find("line 1") != std::string::npos);
    CHECK(error_of("start_deg 0 0 0\n").find("line 1") != std::string::npos);
    CHECK(error_of("# only a comment\n").empty());
}

TEST_CASE("labels by id and defaults") {
    const auto s = parse_scenario("at 0 2\nat 500 none\n");
    CHECK(s.entries[0].label == 2);
    CHECK_FALSE(s.entries[1].label.has_value());
    CHECK(s.end_ms() == 1500);
    CHECK(s.input == InputMode::holds);
    CHECK(parse_scenario("").end_ms() == 0);
}

TEST_CASE("empty script: one state, no goals") {
    const auto r = run_scenario(parse_scenario(""), nullptr);
    CHECK(r.log.states.size() == 1);
    CHECK(r.verdict.status == VerdictStatus::no_goals);
    CHECK(r.audit.ok());
}

TEST_CASE("held PointUp raises the arm, then stops") {
    const auto s = parse_scenario("input holds\nat 0 PointUp\nat 1000 none\nduration 2000\n");
    const auto r = run_scenario(s, nullptr);
    CHECK(r.audit.ok());
    double z_release = 0.0;
    std::vector<double> late;
    for (const auto& st : r.log.states) {
        if (st.t_ms <= 1000) z_release = st.ee[2];
        if (st.t_ms >= 1500) late.push_back(st.ee[2]);
    }
    CHECK(z_release - r.log.states.front().ee[2] > 0.03);
    REQUIRE_FALSE(late.empty());
    for (double z : late) CHECK(z == late.front());
    CHECK(r.log.lines.size() > r.log.states.size());
}

TEST_CASE("scenario runs are deterministic") {
    const auto s = parse_scenario("input holds\nat 0 PointLeft\nat 400 Fist\nat 800 PointDown\nduration 1500\n");
    const auto a = run_scenario(s, nullptr);
    const auto b = run_scenario(s, nullptr);
    CHECK(a.log.lines == b.log.lines);
}

TEST_CASE("frame input needs a classifier") {
    const auto s = parse_scenario("input frames\nat 0 PointUp\n");
    CHECK_THROWS_AS(run_scenario(s, nullptr), ValidationError);
}

TEST_CASE("judge: goal order, placement and extra changes") {
    const SimConfig cfg;
    const Pose start = forward_kinematics(home_joints(), cfg.dh);
    const Vec3 s0{start.position.x(), start.position.y(), start.position.z()};
    ScenarioScript script;
    script.goals = {{{0.1, 0, 0}, 0.03, GripperAction::close}, {{0.1, -0.1, 0}, 0.03, GripperAction::open}};

    auto at = [&](double dx, double dy, double dz) { return Vec3{s0[0] + dx, s0[1] + dy, s0[2] + dz}; };
    ScenarioLog good;
    good.states = {record(0, s0, GripperState::open), record(10, at(0.1, 0.01, 0), GripperState::closed),
                   record(20, at(0.1, -0.1, 0.02), GripperState::open)};
    auto v = judge(script, good, start);
    CHECK(v.status == VerdictStatus::success);
    CHECK(v.goals_reached == 2);

    ScenarioLog far = good;
    far.states[1].ee = at(0.2, 0, 0);
    CHECK(judge(script, far, start).status == VerdictStatus::failure);

    ScenarioLog extra = good;
    extra.states.push_back(record(30, at(0.1, -0.1, 0), GripperState::closed));
    CHECK(judge(script, extra, start).status == VerdictStatus::failure);

    ScenarioLog wrong_order = good;
    wrong_order.states[1].gripper = GripperState::open;
    wrong_order.states[2].gripper = GripperState::closed;
    CHECK(judge(script, wrong_order, start).status == VerdictStatus::failure);

    ScenarioLog rejected = good;
    SafetyMsg m;
    m.accepted = false;
    m.reasons = {SafetyReason::payload};
    rejected.safety.push_back(m);
    v = judge(script, rejected, start);
    CHECK(v.status == VerdictStatus::failure);
    CHECK(v.rejections == 1);
}

TEST_CASE("audit counts out-of-envelope states") {
    const auto env = SafetyEnvelope::defaults();
    ScenarioLog log;
    log.states.push_back(record(0, {}, GripperState::open));
    StateRecord bad = record(10, {}, GripperState::open);
    bad.q[1] = deg_to_rad(-5.0);
    bad.qdot[0] = 1.0;
    log.states.push_back(bad);
    const auto a = audit_log(log, env);
    CHECK(a.states_checked == 2);
    CHECK(a.joint_violations == 1);
    CHECK(a.speed_violations == 1);
    CHECK_FALSE(a.ok());
}
