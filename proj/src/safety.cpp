#include "handjog/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "handjog/error.hpp"

namespace handjog {

std::string_view to_string(SafetyReason r) {
    switch (r) {
        case SafetyReason::joint_limit: return "joint_limit";
        case SafetyReason::speed_limit: return "speed_limit";
        case SafetyReason::payload: return "payload";
    }
    return "joint_limit";
}

SafetyEnvelope SafetyEnvelope::defaults() {
    SafetyEnvelope e;
    e.joint_limits.fill({-360.0, 360.0});
    e.joint_limits[kShoulderLift] = {-183.0, -13.0};
    e.max_joint_speed.fill(std::numbers::pi);
    return e;
}

void SafetyEnvelope::validate() const {
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& l = joint_limits[j];
        if (!(l.min_deg < l.max_deg)) throw ValidationError("joint " + std::to_string(j) + ": min must be < max");
        if (!(max_joint_speed[j] > 0.0)) throw ValidationError("max_joint_speed must be > 0");
    }
    if (!(speed_fraction > 0.0 && speed_fraction <= 1.0)) throw ValidationError("speed_fraction must be in (0, 1]");
    if (!(payload_cap > 0.0)) throw ValidationError("payload_cap must be > 0");
}

void SafetyVerdict::flag(SafetyReason r) {
    if (!has(r)) reasons.push_back(r);
}

bool SafetyVerdict::has(SafetyReason r) const { return std::find(reasons.begin(), reasons.end(), r) != reasons.end(); }

void SafetyVerdict::merge(const SafetyVerdict& other) {
    accepted = accepted && other.accepted;
    clamped = clamped || other.clamped;
    for (auto r : other.reasons) flag(r);
}

ClampResult clamp_joint_targets(const Joints& q_deg, const SafetyEnvelope& envelope) {
    ClampResult out{q_deg, false};
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& l = envelope.joint_limits[j];
        const double c = std::clamp(q_deg[j], l.min_deg, l.max_deg);
        if (c != q_deg[j]) out.clamped = true;
        out.q[j] = c;
    }
    return out;
}

ClampResult clamp_joint_radians(const Joints& q_rad, const SafetyEnvelope& envelope) {
    ClampResult out{q_rad, false};
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& l = envelope.joint_limits[j];
        const double deg = rad_to_deg(q_rad[j]);
        double r = q_rad[j];
        if (deg < l.min_deg) {
            r = deg_to_rad(l.min_deg);
            while (rad_to_deg(r) < l.min_deg) r = std::nextafter(r, inf);
        } else if (deg > l.max_deg) {
            r = deg_to_rad(l.max_deg);
            while (rad_to_deg(r) > l.max_deg) r = std::nextafter(r, -inf);
        } else {
            continue;
        }
        out.q[j] = r;
        out.clamped = true;
    }
    return out;
}

bool within_joint_limits(const Joints& q_rad, const SafetyEnvelope& envelope) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const double deg = rad_to_deg(q_rad[j]);
        if (!(deg >= envelope.joint_limits[j].min_deg && deg <= envelope.joint_limits[j].max_deg)) return false;
    }
    return true;
}

bool within_speed_limits(const Joints& qdot, const SafetyEnvelope& envelope) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!(std::abs(qdot[j]) <= envelope.speed_cap(j))) return false;
    }
    return true;
}

Joints scale_joint_speed(const Joints& qdot, const SafetyEnvelope& envelope) {
    double factor = 1.0;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const double cap = envelope.speed_cap(j);
        const double mag = std::abs(qdot[j]);
        if (mag > cap) factor = std::min(factor, cap / mag);
    }
    if (factor == 1.0) return qdot;
    Joints out{};
    for (std::size_t j = 0; j < kJointCount; ++j) {
        out[j] = qdot[j] * factor;
        // Rounding in the product can land one ulp above the cap.
        const double cap = envelope.speed_cap(j);
        if (std::abs(out[j]) > cap) out[j] = std::copysign(cap, out[j]);
    }
    return out;
}

SafetyVerdict check_payload(double mass_kg, const SafetyEnvelope& envelope) {
    if (!(mass_kg >= 0.0) || !std::isfinite(mass_kg)) throw ValidationError("payload mass must be finite and >= 0");
    SafetyVerdict v;
    if (mass_kg > envelope.payload_cap) {
        v.accepted = false;
        v.flag(SafetyReason::payload);
    }
    return v;
}

JogValidation validate_jog(const JogCommand& cmd, const Joints& q_rad, double payload_kg,
                           const SafetyEnvelope& envelope, const VelocityResolver& resolve, double dt) {
    for (double v : cmd.linear_velocity) {
        if (!std::isfinite(v)) throw ValidationError("jog velocity is not finite");
    }
    for (double q : q_rad) {
        if (!std::isfinite(q)) throw ValidationError("joint position is not finite");
    }
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");

    JogValidation out;
    out.verdict = check_payload(payload_kg, envelope);
    if (!out.verdict.accepted) return out;
    if (cmd.is_stop()) return out;

    const Joints raw = resolve(cmd.linear_velocity, q_rad);
    const Joints scaled = scale_joint_speed(raw, envelope);
    if (scaled != raw) {
        out.verdict.clamped = true;
        out.verdict.flag(SafetyReason::speed_limit);
    }

    Joints next_deg{};
    for (std::size_t j = 0; j < kJointCount; ++j) next_deg[j] = rad_to_deg(q_rad[j] + scaled[j] * dt);
    if (clamp_joint_targets(next_deg, envelope).clamped) {
        out.verdict.accepted = false;
        out.verdict.clamped = true;
        out.verdict.flag(SafetyReason::joint_limit);
        out.qdot = Joints{};
        return out;
    }
    out.qdot = scaled;
    return out;
}

}  // namespace handjog
