#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handjog/pipeline.hpp"

namespace handjog {

enum class InputMode { frames, holds };

std::string_view to_string(InputMode m);

struct ScenarioEntry {
    std::int64_t t_ms = 0;
    std::optional<int> label;  // nullopt: no hand in view
    bool operator==(const ScenarioEntry&) const = default;
};

/// Place where a gripper action is expected, relative to the start pose.
struct GoalRegion {
    Vec3 offset{};
    double radius = 0.0;
    GripperAction action = GripperAction::close;
    bool operator==(const GoalRegion&) const = default;
};

struct ScenarioScript {
    std::string name;
    Joints start_q = home_joints();
    InputMode input = InputMode::holds;
    std::optional<std::int64_t> duration_ms;  // default: last entry + 1 s
    std::vector<ScenarioEntry> entries;
    std::vector<GoalRegion> goals;

    /// Throws ValidationError on a time regression or bad label.
    void validate() const;
    std::int64_t end_ms() const;
};

/// Line format (`#` comments):
///   name <text>
///   start_deg q0 .. q5
///   input frames|holds
///   duration <ms>
///   at <ms> <gesture name or id|none>
///   goal_rel dx dy dz radius open|close
ScenarioScript parse_scenario(std::string_view text);
ScenarioScript load_scenario(const std::filesystem::path& path);
std::string format_scenario(const ScenarioScript& script);

/// Jog to A, close, jog to B, open. Frame input.
ScenarioScript canonical_pick_place();
/// Sustained downward jog from a pose where the shoulder lift runs into
/// its limit.
ScenarioScript limit_seek();

struct StateRecord {
    std::int64_t t_ms = 0;
    Joints q{};
    Joints qdot{};
    Vec3 ee{};
    GripperState gripper = GripperState::open;
};

struct ScenarioLog {
    std::vector<StateRecord> states;
    std::vector<SafetyMsg> safety;
    std::vector<GestureMsg> gestures;
    std::vector<JogCommand> jogs;

    /// Every logged message as wire-protocol lines, in publish order.
    std::vector<std::string> lines;
};

struct AuditReport {
    std::size_t states_checked = 0;
    std::size_t joint_violations = 0;
    std::size_t speed_violations = 0;
    bool ok() const { return joint_violations == 0 && speed_violations == 0; }
};

/// Post-hoc check of the logged states against the envelope.
AuditReport audit_log(const ScenarioLog& log, const SafetyEnvelope& envelope);

enum class VerdictStatus { success, failure, no_goals };

std::string_view to_string(VerdictStatus s);

struct ScenarioVerdict {
    VerdictStatus status = VerdictStatus::no_goals;
    std::size_t goals_reached = 0;
    std::size_t safety_events = 0;
    std::size_t joint_limit_events = 0;
    std::size_t rejections = 0;  // safety events with accepted == false
    std::vector<std::string> notes;
};

struct ScenarioOptions {
    PipelineConfig pipeline;
    std::uint64_t seed = 7;
    double jitter_sigma = 0.02;
    double max_translation = 0.2;
    std::int64_t input_period_ms = 33;  // ~30 fps
};

struct ScenarioResult {
    ScenarioLog log;
    AuditReport audit;
    ScenarioVerdict verdict;
};

/// Drives the perception, controller and sim nodes on a virtual clock in
/// 1 ms steps. `classifier` may be null for hold input.
ScenarioResult run_scenario(const ScenarioScript& script, std::shared_ptr<const Classifier> classifier,
                            const ScenarioOptions& options = {});

/// Goal-region membership at each gripper change, in script order.
ScenarioVerdict judge(const ScenarioScript& script, const ScenarioLog& log, const Pose& start);

}  // namespace handjog
