#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>

#include "quadmppi/dynamics.hpp"

namespace quadmppi {

/// The controller's input: collective thrust plus desired body rates.
struct BodyCommand {
  double thrust = 0.0;          // N
  Vec3 rates = Vec3::Zero();    // rad/s

  /// Channel order [F_t, w_x, w_y, w_z], matching the noise covariance.
  Vec4 as_vector() const { return Vec4(thrust, rates.x(), rates.y(), rates.z()); }
  static BodyCommand from_vector(const Vec4& u) {
    return BodyCommand{u(0), Vec3(u(1), u(2), u(3))};
  }

  friend bool operator==(const BodyCommand& a, const BodyCommand& b) {
    return a.thrust == b.thrust && a.rates == b.rates;
  }
};

struct RotorThrusts {
  Vec4 thrust = Vec4::Zero();   // N, one per rotor
};

/// A command that the rotors can actually produce. `wrench` drives the
/// simulated dynamics, `body` is what goes to the low-level rate loop; both
/// come from the same clipped rotor thrusts.
struct FeasibleCommand {
  WrenchCommand wrench;
  BodyCommand body;
  RotorThrusts rotors;
};

/// Maps rotor thrusts to [F_t, tau_x, tau_y, tau_z] for an X-configuration.
inline Mat4 allocation_matrix(const DroneParams& params) {
  const double a = params.arm_length / std::sqrt(2.0);
  const double c = params.torque_constant;
  Mat4 gamma;
  gamma << 1.0, 1.0, 1.0, 1.0,
           -a, a, a, -a,
           -a, a, -a, a,
           -c, -c, c, c;
  return gamma;
}

/// tau_d = J (w_d - w) / dt + w x J w
inline Vec3 desired_torques(const State& x, const Vec3& rates_desired, double dt,
                            const DroneParams& params) {
  const Vec3 w = x.w();
  const Vec3 rate_change = (rates_desired - w) / dt;
  const Vec3 jw = params.inertia.cwiseProduct(w);
  return params.inertia.cwiseProduct(rate_change) + w.cross(jw);
}

/// Element-wise clamp of the desired body rates to the safety limits.
inline BodyCommand apply_rate_limits(BodyCommand cmd, const DroneParams& params) {
  cmd.rates.x() = std::clamp(cmd.rates.x(), -params.rate_xy_max, params.rate_xy_max);
  cmd.rates.y() = std::clamp(cmd.rates.y(), -params.rate_xy_max, params.rate_xy_max);
  cmd.rates.z() = std::clamp(cmd.rates.z(), -params.rate_z_max, params.rate_z_max);
  return cmd;
}

/// Rotor allocation with the inverse cached; this sits in the innermost
/// rollout loop.
class ActuatorModel {
 public:
  explicit ActuatorModel(const DroneParams& params)
      : params_(params), gamma_(allocation_matrix(params)) {
    params_.validate();
    const Eigen::FullPivLU<Mat4> lu(gamma_);
    if (!lu.isInvertible()) {
      throw std::invalid_argument("ActuatorModel: allocation matrix is singular");
    }
    gamma_inv_ = lu.inverse();
  }

  const DroneParams& params() const { return params_; }
  const Mat4& allocation() const { return gamma_; }
  const Mat4& allocation_inverse() const { return gamma_inv_; }

  RotorThrusts to_rotors(double thrust, const Vec3& torque) const {
    return RotorThrusts{gamma_inv_ * Vec4(thrust, torque.x(), torque.y(), torque.z())};
  }

  WrenchCommand to_wrench(const RotorThrusts& rotors) const {
    const Vec4 f = gamma_ * rotors.thrust;
    return WrenchCommand{f(0), f.tail<3>()};
  }

  RotorThrusts clip(RotorThrusts rotors) const {
    rotors.thrust = rotors.thrust.cwiseMax(params_.thrust_min).cwiseMin(params_.thrust_max);
    return rotors;
  }

  /// Projects a wrench onto the rotor limits.
  WrenchCommand clip_wrench(const WrenchCommand& wrench) const {
    return to_wrench(clip(to_rotors(wrench.thrust, wrench.torque)));
  }

  /// Desired rates -> torques -> rotor thrusts -> clip -> feasible wrench and
  /// the body rates that wrench reaches after `dt`. Rate safety limits are
  /// not applied here; see apply_rate_limits.
  FeasibleCommand clip_and_reconstruct(const State& x, const BodyCommand& cmd, double dt) const {
    const Vec3 tau_d = desired_torques(x, cmd.rates, dt, params_);
    const RotorThrusts clipped = clip(to_rotors(cmd.thrust, tau_d));
    const WrenchCommand wrench = to_wrench(clipped);

    const Vec3 w = x.w();
    const Vec3 jw = params_.inertia.cwiseProduct(w);
    const Vec3 rate_change = (wrench.torque - w.cross(jw)).cwiseQuotient(params_.inertia);
    return FeasibleCommand{wrench, BodyCommand{wrench.thrust, w + rate_change * dt}, clipped};
  }

 private:
  DroneParams params_;
  Mat4 gamma_;
  Mat4 gamma_inv_;
};

}  // namespace quadmppi
