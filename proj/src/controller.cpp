#include "handjog/controller.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "handjog/error.hpp"

namespace handjog {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

constexpr std::string_view axis_name(Axis a) {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "x";
}

}  // namespace

std::string_view to_string(GripperAction a) { return a == GripperAction::open ? "open" : "close"; }
std::string_view to_string(GripperState s) { return s == GripperState::open ? "open" : "closed"; }

std::string format_intent(const CommandIntent& intent) {
    switch (intent.kind) {
        case CommandIntent::Kind::none: return "none";
        case CommandIntent::Kind::jog:
            return "jog " + std::string(axis_name(intent.axis)) + (intent.direction > 0 ? " +" : " -");
        case CommandIntent::Kind::gripper: return "grip " + std::string(to_string(intent.grip));
    }
    return "none";
}

std::optional<CommandIntent> parse_intent(std::string_view text) {
    const auto w = words(text);
    if (w.size() == 1 && w[0] == "none") return CommandIntent::none();
    if (w.size() == 2 && w[0] == "grip") {
        if (w[1] == "open") return CommandIntent::gripper(GripperAction::open);
        if (w[1] == "close") return CommandIntent::gripper(GripperAction::close);
        return std::nullopt;
    }
    if (w.size() == 3 && w[0] == "jog") {
        Axis axis;
        if (w[1] == "x") axis = Axis::x;
        else if (w[1] == "y") axis = Axis::y;
        else if (w[1] == "z") axis = Axis::z;
        else return std::nullopt;
        if (w[2] == "+") return CommandIntent::jog(axis, +1);
        if (w[2] == "-") return CommandIntent::jog(axis, -1);
    }
    return std::nullopt;
}

GestureMap default_gesture_map() {
    return {
        CommandIntent::gripper(GripperAction::close),  // Fist
        CommandIntent::gripper(GripperAction::open),   // OpenPalm
        CommandIntent::jog(Axis::z, +1),               // PointUp
        CommandIntent::jog(Axis::z, -1),               // PointDown
        CommandIntent::jog(Axis::y, -1),               // PointLeft
        CommandIntent::jog(Axis::y, +1),               // PointRight
        CommandIntent::jog(Axis::x, -1),               // Peace
        CommandIntent::jog(Axis::x, +1),               // ThumbUp
    };
}

GestureMap parse_gesture_map(std::string_view text, const GestureMap& base) {
    GestureMap map = base;
    std::array<bool, kGestureCount> seen{};
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            throw ValidationError("gesture map line " + std::to_string(line_no) + ": " + what);
        };
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'label_id = intent'");
        const std::string_view key = trim(line.substr(0, eq));
        int id = -1;
        auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (key.empty() || ec != std::errc() || p != key.data() + key.size()) {
            if (auto named = gesture_id(key)) id = *named;
            else fail("bad label '" + std::string(key) + "'");
        }
        if (id < 0 || id >= kGestureCount) fail("label " + std::to_string(id) + " out of range [0,7]");
        if (seen[static_cast<std::size_t>(id)]) fail("duplicate entry for label " + std::to_string(id));
        const auto intent = parse_intent(trim(line.substr(eq + 1)));
        if (!intent) fail("bad intent '" + std::string(trim(line.substr(eq + 1))) + "'");
        map[static_cast<std::size_t>(id)] = *intent;
        seen[static_cast<std::size_t>(id)] = true;
    }
    return map;
}

GestureMap load_gesture_map(const std::filesystem::path& path, const GestureMap& base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open gesture map '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_gesture_map(ss.str(), base);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string format_gesture_map(const GestureMap& map) {
    std::string out;
    for (int i = 0; i < kGestureCount; ++i) {
        out += std::to_string(i) + " = " + format_intent(map[static_cast<std::size_t>(i)]) + "  # " +
               std::string(gesture_name(i)) + "\n";
    }
    return out;
}

void ControllerConfig::validate() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
        throw ValidationError("confidence_threshold must be in [0, 1]");
    }
    if (debounce_frames < 1) throw ValidationError("debounce_frames must be >= 1");
    if (!(jog_speed > 0.0)) throw ValidationError("jog_speed must be > 0");
    if (gesture_timeout_ms < 0) throw ValidationError("gesture_timeout_ms must be >= 0");
}

CommandIntent map_gesture(int label, const ControllerConfig& config) {
    if (label < 0 || label >= kGestureCount) {
        throw ValidationError("gesture label " + std::to_string(label) + " out of range");
    }
    return config.gesture_map[static_cast<std::size_t>(label)];
}

namespace {

JogCommand jog_command(const CommandIntent& intent, double speed, std::int64_t now) {
    JogCommand cmd;
    cmd.stamp_ms = now;
    cmd.linear_velocity[static_cast<std::size_t>(intent.axis)] = speed * intent.direction;
    return cmd;
}

JogCommand stop_command(std::int64_t now) {
    JogCommand cmd;
    cmd.stamp_ms = now;
    return cmd;
}

}  // namespace

ControllerUpdate update(const ControllerState& state, const std::optional<GestureEvent>& event, std::int64_t now_ms,
                        const ControllerConfig& config) {
    if (state.last_update_ms && now_ms < *state.last_update_ms) {
        throw ValidationError("controller time went backwards: " + std::to_string(now_ms) + " < " +
                              std::to_string(*state.last_update_ms));
    }
    ControllerUpdate out{state, std::nullopt};
    ControllerState& s = out.state;
    s.last_update_ms = now_ms;

    std::optional<GestureEvent> ev = event;
    if (ev && ev->confidence < config.confidence_threshold) ev.reset();

    if (ev) {
        s.last_event_ms = now_ms;
        if (s.candidate == ev->label) {
            s.consecutive = std::min(s.consecutive + 1, config.debounce_frames);
        } else {
            s.candidate = ev->label;
            s.consecutive = 1;
        }
        if (s.consecutive >= config.debounce_frames) {
            const CommandIntent intent = map_gesture(ev->label, config);
            if (intent != s.active) {
                const CommandIntent previous = s.active;
                s.active = intent;
                switch (intent.kind) {
                    case CommandIntent::Kind::jog:
                        out.command = jog_command(intent, config.jog_speed, now_ms);
                        break;
                    case CommandIntent::Kind::gripper: {
                        JogCommand cmd = stop_command(now_ms);
                        cmd.gripper_action = intent.grip;
                        s.gripper = intent.grip == GripperAction::close ? GripperState::closed : GripperState::open;
                        out.command = cmd;
                        break;
                    }
                    case CommandIntent::Kind::none:
                        if (previous.kind == CommandIntent::Kind::jog) out.command = stop_command(now_ms);
                        break;
                }
                return out;
            }
        }
    } else if (s.last_event_ms && now_ms - *s.last_event_ms > config.gesture_timeout_ms) {
        s.candidate.reset();
        s.consecutive = 0;
        if (s.active.kind != CommandIntent::Kind::none) {
            s.active = CommandIntent::none();
            out.command = stop_command(now_ms);
            return out;
        }
    }

    if (s.active.kind == CommandIntent::Kind::jog) out.command = jog_command(s.active, config.jog_speed, now_ms);
    return out;
}

}  // namespace handjog
