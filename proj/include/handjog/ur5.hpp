#pragma once

#include <array>

#include <Eigen/Core>

#include "handjog/controller.hpp"
#include "handjog/safety.hpp"

namespace handjog {

/// Standard Denavit-Hartenberg link constants for one joint.
struct DHRow {
    double a = 0.0;      // m
    double d = 0.0;      // m
    double alpha = 0.0;  // rad
};

using DHTable = std::array<DHRow, kJointCount>;

/// Published UR5 vendor constants.
DHTable ur5_dh();

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

using Jacobian = Eigen::Matrix<double, 6, 6>;

/// Base-to-frame transforms T_0 .. T_6 (T_0 = identity).
std::array<Eigen::Matrix4d, kJointCount + 1> link_frames(const Joints& q, const DHTable& dh);

/// Flange pose: product of the six standard DH transforms.
Pose forward_kinematics(const Joints& q, const DHTable& dh = ur5_dh());

/// Geometric Jacobian; rows 0-2 linear, rows 3-5 angular.
Jacobian jacobian(const Joints& q, const DHTable& dh = ur5_dh());

struct SimConfig {
    double dt = 0.01;        // s
    double damping = 0.05;   // DLS lambda
    SafetyEnvelope envelope = SafetyEnvelope::defaults();
    DHTable dh = ur5_dh();

    void validate() const;
};

/// Damped least squares on the linear block Jv (3x6):
/// qdot = Jv^T (Jv Jv^T + lambda^2 I)^-1 v.
Joints resolve_velocity(const Vec3& v, const Joints& q, const SimConfig& config);

VelocityResolver make_resolver(const SimConfig& config);

/// Mid-workspace start pose (rad): (0, -90, 90, -90, -90, 0) deg.
Joints home_joints();

struct SimState {
    Joints q{};
    Joints qdot{};
    Pose ee;
    GripperState gripper = GripperState::open;
    double t = 0.0;  // s

    static SimState at(const Joints& q, const SimConfig& config);
};

struct StepResult {
    SimState state;
    SafetyVerdict verdict;  // reasons empty when nothing was limited
};

/// Resolve, speed-scale, explicit Euler, clamp, recompute the flange pose.
/// Joints pinned by the clamp report zero velocity.
StepResult step(const SimState& state, const JogCommand& cmd, const SimConfig& config);

}  // namespace handjog
