#pragma once

#include <algorithm>
#include <cmath>

#include "softctrl/errors.hpp"

namespace softctrl::kin {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

struct Pose {
    double x = 0.0;      // m, global frame
    double y = 0.0;      // m, global frame
    double theta = 0.0;  // rad, in (-pi, pi]
};

// Target pose expressed in a source state's ego frame.
struct LocalPose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

struct EgoState {
    Pose pose;
    double speed = 0.0;  // m per frame, signed; negative means reversing
};

struct Action {
    double steer = 0.0;  // rad per frame
    double accel = 0.0;  // m per frame^2
};

// Per-frame action and speed bounds. steer_max must stay below pi/2 so the
// sign rule in inverse_action never hits its degenerate boundary.
struct Limits {
    double steer_max = 0.3;   // rad
    double accel_max = 0.06;  // m/frame^2  (6 m/s^2 at dt = 0.1 s)
    double v_max = 1.7;       // m/frame    (~61 km/h at dt = 0.1 s)

    void validate() const {
        if (!(steer_max > 0.0 && steer_max < kPi / 2.0))
            throw ConfigError("limits.steer_max must lie in (0, pi/2)");
        if (!(accel_max > 0.0)) throw ConfigError("limits.accel_max must be positive");
        if (!(v_max > 0.0)) throw ConfigError("limits.v_max must be positive");
    }

    Action clamp(const Action& a) const {
        return {std::clamp(a.steer, -steer_max, steer_max),
                std::clamp(a.accel, -accel_max, accel_max)};
    }
};

// Unicycle update: heading turns by steer, speed integrates accel, then the
// ego translates by the new speed along the new heading. This is the unique
// forward model inverted exactly by inverse_action.
inline EgoState step_forward(const EgoState& state, const Action& action,
                             const Limits& limits = Limits{}) {
    EgoState next;
    next.pose.theta = wrap_angle(state.pose.theta + action.steer);
    next.speed = std::clamp(state.speed + action.accel, -limits.v_max, limits.v_max);
    next.pose.x = state.pose.x + next.speed * std::cos(next.pose.theta);
    next.pose.y = state.pose.y + next.speed * std::sin(next.pose.theta);
    return next;
}

// Rigid transform of target into source's frame.
inline LocalPose to_local(const Pose& source, const Pose& target) {
    const double dx = target.x - source.x;
    const double dy = target.y - source.y;
    const double c = std::cos(source.theta);
    const double s = std::sin(source.theta);
    return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(target.theta - source.theta)};
}

inline Pose to_global(const Pose& source, const LocalPose& local) {
    const double c = std::cos(source.theta);
    const double s = std::sin(source.theta);
    return {source.x + c * local.x - s * local.y, source.y + s * local.x + c * local.y,
            wrap_angle(source.theta + local.theta)};
}

// Closed-form inverse of step_forward: steer is the relative heading, accel
// is the signed displacement magnitude minus the previous speed. The result
// is intentionally unclamped; exactness wins over feasibility.
inline Action inverse_action(const EgoState& state, const LocalPose& target) {
    if (std::abs(target.theta) >= kPi / 2.0)
        throw DegenerateTarget("inverse_action: |relative heading| >= pi/2, sign rule ambiguous");
    const double dist = std::sqrt(target.x * target.x + target.y * target.y);
    const double eta = (target.x * std::cos(target.theta) > 0.0) ? 1.0 : -1.0;
    return {target.theta, eta * dist - state.speed};
}

}  // namespace softctrl::kin
