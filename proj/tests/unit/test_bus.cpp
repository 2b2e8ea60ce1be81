#include <doctest.h>

#include <chrono>
#include <thread>

#include <json.hpp>

#include "handjog/bus.hpp"
#include "handjog/error.hpp"
#include "handjog/latency.hpp"
#include "handjog/wire.hpp"

using namespace handjog;
using nlohmann::json;

namespace {

GestureMsg gesture(int label) {
    GestureMsg g;
    g.label = label;
    g.confidence = 0.9;
    return g;
}

LandmarkFrame flat_frame(std::size_t n) {
    LandmarkFrame f;
    f.points.assign(n, {0.5, 0.5});
    return f;
}

}  // namespace

TEST_CASE("topic names") {
    for (std::size_t i = 0; i < kTopicCount; ++i) {
        const auto t = static_cast<Topic>(i);
        CHECK(parse_topic(topic_name(t)) == t);
    }
    CHECK(topic_name(Topic::state) == "robot/state");
    CHECK_FALSE(parse_topic("robot/joints").has_value());
}

TEST_CASE("publish with no subscribers and sequence numbers") {
    Bus bus;
    const auto a = bus.publish(Topic::gesture, gesture(1), 0);
    const auto b = bus.publish(Topic::gesture, gesture(2), 1);
    CHECK(a == 1);
    CHECK(b == a + 1);
    CHECK(bus.published(Topic::gesture) == 2);
    // Sequences are per topic.
    CHECK(bus.publish(Topic::safety, SafetyMsg{}, 1) == 1);
}

TEST_CASE("schema mismatch and unknown topic") {
    Bus bus;
    CHECK_THROWS_AS(bus.publish(Topic::jog, gesture(1), 0), ValidationError);
    CHECK_THROWS_AS(bus.subscribe("robot/nowhere"), ValidationError);
    CHECK(bus.subscribe("robot/state").valid());
}

TEST_CASE("no replay for late subscribers") {
    Bus bus;
    bus.publish(Topic::gesture, gesture(1), 0);
    auto sub = bus.subscribe(Topic::gesture);
    CHECK_FALSE(sub.try_pop().has_value());
    bus.publish(Topic::gesture, gesture(2), 1);
    const auto env = sub.try_pop();
    REQUIRE(env.has_value());
    CHECK(env->seq == 2);
}

TEST_CASE("ten thousand publishes arrive in order") {
    Bus bus(20000);
    auto sub = bus.subscribe(Topic::gesture);
    for (int i = 0; i < 10000; ++i) bus.publish(Topic::gesture, gesture(i % 8), i);
    std::uint64_t last = 0, count = 0;
    while (auto env = sub.try_pop()) {
        CHECK(env->seq == last + 1);
        last = env->seq;
        ++count;
    }
    CHECK(count == 10000);
}

TEST_CASE("drop-oldest overflow") {
    Bus bus(64);
    auto slow = bus.subscribe(Topic::gesture);
    for (int i = 0; i < 1000; ++i) bus.publish(Topic::gesture, gesture(0), i);
    CHECK(slow.dropped(Topic::gesture) == 936);
    std::vector<std::uint64_t> seqs;
    while (auto env = slow.try_pop()) seqs.push_back(env->seq);
    REQUIRE(seqs.size() == 64);
    CHECK(seqs.front() == 937);
    CHECK(seqs.back() == 1000);
    CHECK(slow.delivered(Topic::gesture) + slow.dropped(Topic::gesture) == bus.published(Topic::gesture));
}

TEST_CASE("fan-out and no cross-talk") {
    Bus bus;
    auto a = bus.subscribe(Topic::gesture);
    auto b = bus.subscribe(Topic::gesture);
    auto other = bus.subscribe({Topic::state, Topic::safety});
    for (int i = 0; i < 10; ++i) bus.publish(Topic::gesture, gesture(i % 8), i);
    bus.publish(Topic::safety, SafetyMsg{}, 10);
    for (int i = 0; i < 10; ++i) {
        const auto x = a.try_pop(), y = b.try_pop();
        REQUIRE(x.has_value());
        REQUIRE(y.has_value());
        CHECK(x->seq == y->seq);
        CHECK(std::get<GestureMsg>(x->payload).label == std::get<GestureMsg>(y->payload).label);
    }
    CHECK_FALSE(a.try_pop().has_value());
    const auto s = other.try_pop();
    REQUIRE(s.has_value());
    CHECK(s->topic == Topic::safety);
    CHECK_FALSE(other.try_pop().has_value());
}

TEST_CASE("concurrent publishers keep per-topic order") {
    Bus bus(100000);
    auto sub = bus.subscribe({Topic::gesture, Topic::safety});
    std::thread t1([&] {
        for (int i = 0; i < 5000; ++i) bus.publish(Topic::gesture, gesture(0), i);
    });
    std::thread t2([&] {
        for (int i = 0; i < 5000; ++i) bus.publish(Topic::safety, SafetyMsg{}, i);
    });
    t1.join();
    t2.join();
    std::uint64_t last_g = 0, last_s = 0, n = 0;
    while (auto env = sub.try_pop()) {
        auto& last = env->topic == Topic::gesture ? last_g : last_s;
        CHECK(env->seq > last);
        last = env->seq;
        ++n;
    }
    CHECK(n == 10000);
}

TEST_CASE("close wakes blocked consumers") {
    Bus bus;
    auto sub = bus.subscribe(Topic::jog);
    std::thread waiter([&] { CHECK_FALSE(sub.pop_for(std::chrono::seconds(5)).has_value()); });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const auto start = std::chrono::steady_clock::now();
    bus.close();
    waiter.join();
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(2));
}

// ---- latency ----

TEST_CASE("percentile nearest rank") {
    CHECK(percentile({5, 1, 3, 2, 4}, 50) == 3);
    CHECK(percentile({5, 1, 3, 2, 4}, 100) == 5);
    CHECK(percentile({7}, 99) == 7);
    CHECK_THROWS_AS(percentile({}, 50), ValidationError);
}

TEST_CASE("latency tracker ordering, window and errors") {
    LatencyTracker t;
    CHECK_THROWS_AS(t.measure(300), ValidationError);
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) t.record(Stage::frame_to_gesture, static_cast<std::int64_t>(rng.uniform(1e4, 1e6)));
    const auto r = t.measure(300);
    const auto& s = r[Stage::frame_to_gesture];
    CHECK(r.window == 300);
    CHECK(s.samples == 300);
    CHECK(s.p50_ms <= s.p99_ms);
    CHECK(s.p99_ms <= s.max_ms);
    CHECK(r[Stage::jog_to_state].samples == 0);
    CHECK_FALSE(r.stale);
}

TEST_CASE("stopped traffic is flagged stale") {
    LatencyTracker t(64, 2'000'000);
    t.record(Stage::gesture_to_jog, 1000);
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    CHECK(t.measure(10).stale);
}

// ---- wire ----

TEST_CASE("wire: frame encode and parse") {
    LandmarkFrame f = flat_frame(21);
    f.timestamp_ms = 1234;
    f.handedness = Handedness::left;
    f.points[3] = {0.25, 0.75};
    const auto in = wire::parse_inbound(wire::encode_frame(f));
    const auto& got = std::get<wire::FrameIn>(in).frame;
    CHECK(got.timestamp_ms == 1234);
    CHECK(got.handedness == Handedness::left);
    CHECK(got.points == f.points);
}

TEST_CASE("wire: z coordinates are ignored") {
    std::string pts;
    for (int i = 0; i < 21; ++i) pts += std::string(i ? "," : "") + "[0.1,0.2,-0.05]";
    const auto in = wire::parse_inbound(R"({"type":"frame","t":5,"pts":[)" + pts + "]}");
    CHECK(std::get<wire::FrameIn>(in).frame.points[20] == Landmark{0.1, 0.2});
}

TEST_CASE("wire: error codes") {
    auto code_of = [](const std::string& line) {
        try {
            wire::parse_inbound(line);
        } catch (const wire::WireError& e) {
            return e.code();
        }
        return std::string("none");
    };
    std::string short_pts;
    for (int i = 0; i < 20; ++i) short_pts += std::string(i ? "," : "") + "[0.5,0.5]";
    CHECK(code_of(R"({"type":"frame","pts":[)" + short_pts + "]}") == "bad_frame");
    CHECK(code_of("{not json") == "bad_json");
    CHECK(code_of("[1,2]") == "bad_message");
    CHECK(code_of(R"({"type":"dance"})") == "bad_message");
    CHECK(code_of(R"({"type":"gesture_hold","label":8})") == "bad_gesture");
    CHECK(code_of(R"({"type":"hello"})") == "bad_hello");
    CHECK(code_of(R"({"type":"frame","hand":"middle","pts":[]})") == "bad_frame");
}

TEST_CASE("wire: hello and gesture hold") {
    CHECK(std::get<wire::Hello>(wire::parse_inbound(wire::encode_client_hello())).proto == 1);
    const auto hold = std::get<wire::GestureHold>(wire::parse_inbound(wire::encode_gesture_hold(2, 77)));
    CHECK(hold.label == 2);
    CHECK(hold.t == 77);

    const json hello = json::parse(wire::encode_server_hello(ur5_dh()));
    CHECK(hello["type"] == "hello");
    CHECK(hello["proto"] == 1);
    CHECK(hello["dh"].size() == 6);
    CHECK(hello["gestures"][7] == "ThumbUp");
}

TEST_CASE("wire: outbound schemas") {
    JogCommand jog;
    jog.linear_velocity = {0, 0, 0.05};
    jog.stamp_ms = 10;
    json j = json::parse(wire::encode(jog));
    CHECK(j["type"] == "jog");
    CHECK(j["v"][2] == 0.05);
    CHECK(j["grip"].is_null());
    jog.gripper_action = GripperAction::close;
    CHECK(json::parse(wire::encode(jog))["grip"] == "close");

    const SimConfig cfg;
    const auto state = wire::make_state_msg(SimState::at(home_joints(), cfg), 42, 0);
    j = json::parse(wire::encode(state));
    CHECK(j["type"] == "state");
    CHECK(j["t"] == 42);
    CHECK(j["q"].size() == 6);
    CHECK(j["ee"].size() == 3);
    CHECK(j["R"].size() == 9);
    CHECK(j["grip"] == "open");

    SafetyMsg s;
    s.reasons = {SafetyReason::joint_limit};
    s.clamped = true;
    j = json::parse(wire::encode(s));
    CHECK(j["reasons"][0] == "joint_limit");
    CHECK(j["clamped"] == true);

    j = json::parse(wire::encode(gesture(7)));
    CHECK(j["name"] == "ThumbUp");
    CHECK(j["conf"] == 0.9);

    Envelope env;
    env.payload = FrameMsg{};
    CHECK_FALSE(wire::encode_outbound(env).has_value());
}
