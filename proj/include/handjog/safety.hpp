#pragma once

#include <array>
#include <functional>
#include <numbers>
#include <string_view>
#include <vector>

#include "handjog/controller.hpp"

namespace handjog {

inline constexpr std::size_t kJointCount = 6;
inline constexpr std::size_t kShoulderLift = 1;

using Joints = std::array<double, kJointCount>;
using Vec3 = std::array<double, 3>;

inline double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / std::numbers::pi); }

enum class SafetyReason { joint_limit, speed_limit, payload };

std::string_view to_string(SafetyReason r);

struct JointLimit {
    double min_deg = -360.0;
    double max_deg = 360.0;
};

/// Joint range, speed and payload limits applied before any motion.
struct SafetyEnvelope {
    std::array<JointLimit, kJointCount> joint_limits{};
    double speed_fraction = 0.2;
    Joints max_joint_speed{};  // rad/s
    double payload_cap = 1.0;  // kg

    /// UR5 defaults: +-360 deg everywhere except shoulder lift in
    /// [-183, -13] deg; 20% of pi rad/s; 1 kg payload.
    static SafetyEnvelope defaults();

    void validate() const;
    double speed_cap(std::size_t joint) const { return speed_fraction * max_joint_speed[joint]; }
};

struct SafetyVerdict {
    bool accepted = true;
    bool clamped = false;
    std::vector<SafetyReason> reasons;

    void flag(SafetyReason r);
    bool has(SafetyReason r) const;
    void merge(const SafetyVerdict& other);
};

struct ClampResult {
    Joints q{};
    bool clamped = false;
};

/// Clamps joint angles (degrees) into the envelope.
ClampResult clamp_joint_targets(const Joints& q_deg, const SafetyEnvelope& envelope);

/// Radian variant used by the simulator; the result, converted with
/// rad_to_deg, is guaranteed to lie inside the degree limits.
ClampResult clamp_joint_radians(const Joints& q_rad, const SafetyEnvelope& envelope);

bool within_joint_limits(const Joints& q_rad, const SafetyEnvelope& envelope);
bool within_speed_limits(const Joints& qdot, const SafetyEnvelope& envelope);

/// Scales the whole vector so the worst joint sits exactly on its cap;
/// leaves it alone when every joint is already within its cap.
Joints scale_joint_speed(const Joints& qdot, const SafetyEnvelope& envelope);

/// Accepted iff mass <= payload_cap. Throws ValidationError on negative mass.
SafetyVerdict check_payload(double mass_kg, const SafetyEnvelope& envelope);

/// Maps a Cartesian linear velocity at joint position q (rad) to joint rates.
using VelocityResolver = std::function<Joints(const Vec3& v, const Joints& q)>;

struct JogValidation {
    SafetyVerdict verdict;
    Joints qdot{};  // all zero when the command is stopped
};

/// Payload check, velocity resolution, speed scaling, then a one-step
/// Euler prediction q + qdot * dt against the joint limits. A predicted
/// limit violation stops the whole motion.
JogValidation validate_jog(const JogCommand& cmd, const Joints& q_rad, double payload_kg,
                           const SafetyEnvelope& envelope, const VelocityResolver& resolve, double dt);

}  // namespace handjog
