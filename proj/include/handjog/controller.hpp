#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "handjog/landmarks.hpp"
#include "handjog/tinynet.hpp"

namespace handjog {

enum class Axis { x = 0, y = 1, z = 2 };
enum class GripperAction { open, close };
enum class GripperState { open, closed };

std::string_view to_string(GripperAction a);
std::string_view to_string(GripperState s);

struct CommandIntent {
    enum class Kind { none, jog, gripper };

    Kind kind = Kind::none;
    Axis axis = Axis::x;
    int direction = 0;  // +1 or -1 for jog
    GripperAction grip = GripperAction::open;

    static CommandIntent none() { return {}; }
    static CommandIntent jog(Axis a, int dir) { return {Kind::jog, a, dir, GripperAction::open}; }
    static CommandIntent gripper(GripperAction g) { return {Kind::gripper, Axis::x, 0, g}; }

    bool operator==(const CommandIntent&) const = default;
};

std::string format_intent(const CommandIntent& intent);
/// Parses `jog <x|y|z> <+|->`, `grip <open|close>` or `none`.
std::optional<CommandIntent> parse_intent(std::string_view text);

using GestureMap = std::array<CommandIntent, kGestureCount>;

GestureMap default_gesture_map();

/// `label_id = intent` lines over the default table; `#` starts a comment.
/// Throws ValidationError naming the line on any bad entry.
GestureMap parse_gesture_map(std::string_view text, const GestureMap& base = default_gesture_map());
GestureMap load_gesture_map(const std::filesystem::path& path, const GestureMap& base = default_gesture_map());
std::string format_gesture_map(const GestureMap& map);

struct ControllerConfig {
    double confidence_threshold = 0.8;
    int debounce_frames = 3;
    double jog_speed = 0.05;  // m/s
    std::int64_t gesture_timeout_ms = 300;
    GestureMap gesture_map = default_gesture_map();

    void validate() const;
};

struct JogCommand {
    std::array<double, 3> linear_velocity{};  // m/s, robot base frame
    std::optional<GripperAction> gripper_action;
    std::int64_t stamp_ms = 0;

    bool is_stop() const {
        return linear_velocity[0] == 0.0 && linear_velocity[1] == 0.0 && linear_velocity[2] == 0.0;
    }
    bool operator==(const JogCommand&) const = default;
};

struct ControllerState {
    CommandIntent active;
    std::optional<int> candidate;
    int consecutive = 0;
    std::optional<std::int64_t> last_event_ms;
    std::optional<std::int64_t> last_update_ms;
    GripperState gripper = GripperState::open;

    bool operator==(const ControllerState&) const = default;
};

CommandIntent map_gesture(int label, const ControllerConfig& config);

struct ControllerUpdate {
    ControllerState state;
    std::optional<JogCommand> command;
};

/// One step of the debounced command state machine. `event` is the
/// classifier output for this tick, or nullopt when nothing was seen.
/// Throws ValidationError if `now_ms` goes backwards.
ControllerUpdate update(const ControllerState& state, const std::optional<GestureEvent>& event, std::int64_t now_ms,
                        const ControllerConfig& config);

}  // namespace handjog
