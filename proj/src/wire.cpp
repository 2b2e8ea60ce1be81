#include "handjog/wire.hpp"

#include <cmath>

#include <json.hpp>

namespace handjog::wire {

using nlohmann::json;

namespace {

json parse_object(std::string_view line) {
    json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw WireError("bad_json", "line is not valid JSON");
    if (!j.is_object()) throw WireError("bad_message", "message must be a JSON object");
    return j;
}

std::int64_t get_time(const json& j, const char* code) {
    auto it = j.find("t");
    if (it == j.end()) return 0;
    if (!it->is_number_integer()) throw WireError(code, "'t' must be an integer millisecond stamp");
    return it->get<std::int64_t>();
}

json grip_value(const std::optional<GripperAction>& a) {
    if (!a) return nullptr;
    return std::string(to_string(*a));
}

}  // namespace

Inbound parse_inbound(std::string_view line) {
    const json j = parse_object(line);
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) throw WireError("bad_message", "missing 'type'");
    const std::string type = type_it->get<std::string>();

    if (type == "hello") {
        auto it = j.find("proto");
        if (it == j.end() || !it->is_number_integer()) throw WireError("bad_hello", "hello needs an integer 'proto'");
        return Hello{it->get<int>()};
    }
    if (type == "frame") {
        FrameIn in;
        in.frame.timestamp_ms = get_time(j, "bad_frame");
        if (auto h = j.find("hand"); h != j.end()) {
            const auto parsed = h->is_string() ? parse_handedness(h->get<std::string>()) : std::nullopt;
            if (!parsed) throw WireError("bad_frame", "'hand' must be left, right or unknown");
            in.frame.handedness = *parsed;
        }
        auto pts = j.find("pts");
        if (pts == j.end() || !pts->is_array()) throw WireError("bad_frame", "'pts' must be an array");
        if (pts->size() != kLandmarkCount) {
            throw WireError("bad_frame", "'pts' has " + std::to_string(pts->size()) + " points, expected 21");
        }
        for (const auto& p : *pts) {
            // A third (z) coordinate is accepted and ignored.
            if (!p.is_array() || p.size() < 2 || p.size() > 3 || !p[0].is_number() || !p[1].is_number()) {
                throw WireError("bad_frame", "each point must be [x, y] or [x, y, z]");
            }
            const double x = p[0].get<double>(), y = p[1].get<double>();
            if (!std::isfinite(x) || !std::isfinite(y)) throw WireError("bad_frame", "non-finite coordinate");
            in.frame.points.push_back({x, y});
        }
        return in;
    }
    if (type == "gesture_hold") {
        auto it = j.find("label");
        if (it == j.end() || !it->is_number_integer()) throw WireError("bad_gesture", "'label' must be an integer");
        const int label = it->get<int>();
        if (label < 0 || label >= kGestureCount) throw WireError("bad_gesture", "'label' must be in [0, 7]");
        return GestureHold{label, get_time(j, "bad_gesture")};
    }
    throw WireError("bad_message", "unknown message type '" + type + "'");
}

std::string encode_server_hello(const DHTable& dh) {
    json rows = json::array();
    for (const auto& r : dh) rows.push_back({r.a, r.d, r.alpha});
    json names = json::array();
    for (int i = 0; i < kGestureCount; ++i) names.push_back(std::string(gesture_name(i)));
    return json{{"type", "hello"}, {"proto", kProtocolVersion}, {"dh", rows}, {"gestures", names}}.dump();
}

std::string encode_client_hello(int proto) { return json{{"type", "hello"}, {"proto", proto}}.dump(); }

std::string encode_error(std::string_view code, std::string_view detail) {
    return json{{"type", "error"}, {"code", code}, {"detail", detail}}.dump();
}

std::string encode(const GestureMsg& m) {
    return json{{"type", "gesture"},
                {"t", m.t},
                {"label", m.label},
                {"name", std::string(gesture_name(m.label))},
                {"conf", m.confidence}}
        .dump();
}

std::string encode(const JogCommand& cmd) {
    return json{{"type", "jog"},
                {"t", cmd.stamp_ms},
                {"v", {cmd.linear_velocity[0], cmd.linear_velocity[1], cmd.linear_velocity[2]}},
                {"grip", grip_value(cmd.gripper_action)}}
        .dump();
}

std::string encode(const StateMsg& m) {
    return json{{"type", "state"},
                {"t", m.t},
                {"q", m.q},
                {"ee", m.ee},
                {"R", m.rotation},
                {"grip", std::string(to_string(m.gripper))}}
        .dump();
}

std::string encode(const SafetyMsg& m) {
    json reasons = json::array();
    for (auto r : m.reasons) reasons.push_back(std::string(to_string(r)));
    return json{{"type", "safety"}, {"t", m.t}, {"reasons", reasons}, {"clamped", m.clamped}}.dump();
}

std::string encode_frame(const LandmarkFrame& frame) {
    json pts = json::array();
    for (const auto& p : frame.points) pts.push_back({p.x, p.y});
    return json{{"type", "frame"},
                {"t", frame.timestamp_ms},
                {"hand", std::string(to_string(frame.handedness))},
                {"pts", pts}}
        .dump();
}

std::string encode_gesture_hold(int label, std::int64_t t) {
    return json{{"type", "gesture_hold"}, {"label", label}, {"t", t}}.dump();
}

std::optional<std::string> encode_outbound(const Envelope& env) {
    return std::visit(
        [](const auto& m) -> std::optional<std::string> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GestureMsg>) return encode(m);
            else if constexpr (std::is_same_v<T, JogMsg>) return encode(m.command);
            else if constexpr (std::is_same_v<T, StateMsg>) return encode(m);
            else if constexpr (std::is_same_v<T, SafetyMsg>) return encode(m);
            else return std::nullopt;
        },
        env.payload);
}

StateMsg make_state_msg(const SimState& s, std::int64_t t_ms, std::uint64_t jog_seq) {
    StateMsg m;
    m.t = t_ms;
    m.q = s.q;
    m.qdot = s.qdot;
    for (int i = 0; i < 3; ++i) m.ee[static_cast<std::size_t>(i)] = s.ee.position(i);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m.rotation[static_cast<std::size_t>(r * 3 + c)] = s.ee.rotation(r, c);
    }
    m.gripper = s.gripper;
    m.jog_seq = jog_seq;
    return m;
}

}  // namespace handjog::wire
