#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "handjog/controller.hpp"
#include "handjog/landmarks.hpp"
#include "handjog/safety.hpp"

namespace handjog {

enum class Topic : std::uint8_t { landmarks = 0, gesture, jog, state, safety };

inline constexpr std::size_t kTopicCount = 5;

std::string_view topic_name(Topic t);
std::optional<Topic> parse_topic(std::string_view name);

struct FrameMsg {
    LandmarkFrame frame;
};

struct GestureMsg {
    std::int64_t t = 0;
    int label = 0;
    double confidence = 0.0;
    // Chaining for latency correlation.
    std::uint64_t frame_seq = 0;
    std::int64_t frame_wall_ns = 0;
};

struct JogMsg {
    JogCommand command;
    std::uint64_t gesture_seq = 0;
    std::int64_t gesture_wall_ns = 0;
    std::int64_t frame_wall_ns = 0;
};

struct StateMsg {
    std::int64_t t = 0;
    Joints q{};
    Joints qdot{};
    Vec3 ee{};
    std::array<double, 9> rotation{};  // row-major
    GripperState gripper = GripperState::open;
    std::uint64_t jog_seq = 0;
};

struct SafetyMsg {
    std::int64_t t = 0;
    std::vector<SafetyReason> reasons;
    bool clamped = false;
    bool accepted = true;
};

using Payload = std::variant<FrameMsg, GestureMsg, JogMsg, StateMsg, SafetyMsg>;

/// Topic whose schema a payload belongs to.
Topic schema_topic(const Payload& payload);

struct Envelope {
    Topic topic = Topic::landmarks;
    std::uint64_t seq = 0;
    std::int64_t stamp_ms = 0;
    std::int64_t wall_ns = 0;  // steady clock at publish
    Payload payload;
};

}  // namespace handjog
