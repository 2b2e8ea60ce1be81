#include "handjog/ur5.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "handjog/error.hpp"

namespace handjog {

DHTable ur5_dh() {
    constexpr double half_pi = std::numbers::pi / 2.0;
    return {{
        {0.0, 0.089159, half_pi},
        {-0.425, 0.0, 0.0},
        {-0.39225, 0.0, 0.0},
        {0.0, 0.10915, half_pi},
        {0.0, 0.09465, -half_pi},
        {0.0, 0.0823, 0.0},
    }};
}

namespace {

Eigen::Matrix4d dh_transform(double theta, const DHRow& row) {
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    Eigen::Matrix4d t;
    t << ct, -st * ca, st * sa, row.a * ct,
         st, ct * ca, -ct * sa, row.a * st,
         0.0, sa, ca, row.d,
         0.0, 0.0, 0.0, 1.0;
    return t;
}

void require_finite(const Joints& q, const char* what) {
    for (double v : q) {
        if (!std::isfinite(v)) throw ValidationError(std::string(what) + " is not finite");
    }
}

}  // namespace

std::array<Eigen::Matrix4d, kJointCount + 1> link_frames(const Joints& q, const DHTable& dh) {
    std::array<Eigen::Matrix4d, kJointCount + 1> frames;
    frames[0].setIdentity();
    for (std::size_t i = 0; i < kJointCount; ++i) frames[i + 1] = frames[i] * dh_transform(q[i], dh[i]);
    return frames;
}

Pose forward_kinematics(const Joints& q, const DHTable& dh) {
    const auto frames = link_frames(q, dh);
    Pose p;
    p.position = frames.back().block<3, 1>(0, 3);
    p.rotation = frames.back().block<3, 3>(0, 0);
    return p;
}

Jacobian jacobian(const Joints& q, const DHTable& dh) {
    const auto frames = link_frames(q, dh);
    const Eigen::Vector3d tip = frames.back().block<3, 1>(0, 3);
    Jacobian j;
    for (std::size_t i = 0; i < kJointCount; ++i) {
        const Eigen::Vector3d axis = frames[i].block<3, 1>(0, 2);
        const Eigen::Vector3d origin = frames[i].block<3, 1>(0, 3);
        j.block<3, 1>(0, static_cast<Eigen::Index>(i)) = axis.cross(tip - origin);
        j.block<3, 1>(3, static_cast<Eigen::Index>(i)) = axis;
    }
    return j;
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ValidationError("sim dt must be > 0");
    if (!(damping > 0.0)) throw ValidationError("sim damping must be > 0");
    envelope.validate();
}

Joints resolve_velocity(const Vec3& v, const Joints& q, const SimConfig& config) {
    const Eigen::Vector3d vel(v[0], v[1], v[2]);
    if (vel.isZero(0.0)) return Joints{};
    const Eigen::Matrix<double, 3, 6> jv = jacobian(q, config.dh).topRows<3>();
    const Eigen::Matrix3d gram =
        jv * jv.transpose() + config.damping * config.damping * Eigen::Matrix3d::Identity();
    const Eigen::Matrix<double, 6, 1> qdot = jv.transpose() * gram.ldlt().solve(vel);
    Joints out{};
    for (std::size_t i = 0; i < kJointCount; ++i) out[i] = qdot(static_cast<Eigen::Index>(i));
    return out;
}

VelocityResolver make_resolver(const SimConfig& config) {
    return [config](const Vec3& v, const Joints& q) { return resolve_velocity(v, q, config); };
}

Joints home_joints() {
    return {0.0, deg_to_rad(-90.0), deg_to_rad(90.0), deg_to_rad(-90.0), deg_to_rad(-90.0), 0.0};
}

SimState SimState::at(const Joints& q, const SimConfig& config) {
    require_finite(q, "initial joint position");
    SimState s;
    s.q = q;
    s.ee = forward_kinematics(q, config.dh);
    return s;
}

StepResult step(const SimState& state, const JogCommand& cmd, const SimConfig& config) {
    require_finite(state.q, "sim joint position");
    if (!std::isfinite(state.t)) throw ValidationError("sim time is not finite");
    for (double v : cmd.linear_velocity) {
        if (!std::isfinite(v)) throw ValidationError("jog velocity is not finite");
    }

    StepResult out;
    SimState& s = out.state;
    s = state;

    const Joints raw = resolve_velocity(cmd.linear_velocity, state.q, config);
    Joints qdot = scale_joint_speed(raw, config.envelope);
    if (qdot != raw) {
        out.verdict.clamped = true;
        out.verdict.flag(SafetyReason::speed_limit);
    }

    Joints next{};
    for (std::size_t j = 0; j < kJointCount; ++j) next[j] = state.q[j] + qdot[j] * config.dt;
    const ClampResult clamped = clamp_joint_radians(next, config.envelope);
    if (clamped.clamped) {
        out.verdict.clamped = true;
        out.verdict.flag(SafetyReason::joint_limit);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            if (clamped.q[j] != next[j]) qdot[j] = 0.0;
        }
    }

    s.q = clamped.q;
    s.qdot = qdot;
    s.ee = forward_kinematics(s.q, config.dh);
    s.t = state.t + config.dt;
    if (cmd.gripper_action) {
        s.gripper = *cmd.gripper_action == GripperAction::close ? GripperState::closed : GripperState::open;
    }
    return out;
}

}  // namespace handjog
