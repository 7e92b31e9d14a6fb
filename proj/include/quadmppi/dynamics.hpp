#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "quadmppi/quaternion.hpp"

namespace quadmppi {

/// Physical quadrotor parameters plus the rotor and body-rate limits.
/// Defaults are the simulated platform (1.21 kg, 7" props).
struct DroneParams {
  double mass = 1.21;               // kg
  double arm_length = 0.15;         // m
  double torque_constant = 0.012;   // m, rotor drag torque per unit thrust
  Vec3 inertia{7.06e-3, 7.06e-3, 13.6e-3};  // kg m^2, diagonal
  Vec3 gravity{0.0, 0.0, -9.81};    // m/s^2
  double thrust_min = 0.3;          // N, per rotor
  double thrust_max = 19.0;         // N, per rotor
  double rate_xy_max = 10.0;        // rad/s
  double rate_z_max = 2.0;          // rad/s

  /// Collective thrust that balances gravity.
  double hover_thrust() const { return mass * gravity.norm(); }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("DroneParams: " + what);
    };
    if (!(mass > 0.0)) fail("mass must be positive");
    if (!(arm_length > 0.0)) fail("arm length must be positive");
    if (!std::isfinite(torque_constant)) fail("torque constant must be finite");
    if (!(inertia.array() > 0.0).all() || !inertia.allFinite()) {
      fail("inertia diagonal must be positive");
    }
    if (!gravity.allFinite()) fail("gravity must be finite");
    if (!(thrust_min >= 0.0) || !(thrust_min < thrust_max) || !std::isfinite(thrust_max)) {
      fail("rotor thrust limits must satisfy 0 <= T_min < T_max");
    }
    if (!(rate_xy_max > 0.0) || !(rate_z_max > 0.0)) fail("body-rate limits must be positive");
  }
};

/// Quadrotor state: position, attitude, velocity, body rates.
/// Stored contiguously as [p(3), q(4), v(3), w(3)] so RK4 can work on the
/// raw 13-vector.
struct State {
  using Vector = Eigen::Matrix<double, 13, 1>;

  Vector data;

  State() {
    data.setZero();
    data(3) = 1.0;
  }
  explicit State(const Vector& raw) : data(raw) {}

  auto p() { return data.segment<3>(0); }
  auto q() { return data.segment<4>(3); }
  auto v() { return data.segment<3>(7); }
  auto w() { return data.segment<3>(10); }
  auto p() const { return data.segment<3>(0); }
  auto q() const { return data.segment<4>(3); }
  auto v() const { return data.segment<3>(7); }
  auto w() const { return data.segment<3>(10); }

  static State at_rest(const Vec3& position, const Quat& attitude = quat_identity()) {
    State s;
    s.p() = position;
    s.q() = attitude;
    return s;
  }

  bool is_finite() const { return data.allFinite(); }

  void normalize_attitude() { q() /= q().norm(); }

  friend bool operator==(const State& a, const State& b) { return a.data == b.data; }
};

/// Collective thrust along body z and body torques.
struct WrenchCommand {
  double thrust = 0.0;            // N
  Vec3 torque = Vec3::Zero();     // N m
};

/// Time derivative of the state under a constant wrench, laid out like State.
/// The thrust direction uses q / |q|, so the intermediate RK4 stages may carry
/// a slightly non-unit quaternion.
inline State::Vector dynamics_derivative(const State& x, const WrenchCommand& u,
                                         const DroneParams& params) {
  const double qw = x.data(3), qx = x.data(4), qy = x.data(5), qz = x.data(6);
  const double wx = x.data(10), wy = x.data(11), wz = x.data(12);
  const Vec3& j = params.inertia;

  // Body z axis of the normalized attitude; every entry is quadratic in q.
  const double accel = u.thrust / (params.mass * (qw * qw + qx * qx + qy * qy + qz * qz));
  const double jx = j.x() * wx, jy = j.y() * wy, jz = j.z() * wz;

  State::Vector dx;
  dx(0) = x.data(7);
  dx(1) = x.data(8);
  dx(2) = x.data(9);
  // 0.5 * q ⊙ (0, w)
  dx(3) = 0.5 * (-qx * wx - qy * wy - qz * wz);
  dx(4) = 0.5 * (qw * wx + qy * wz - qz * wy);
  dx(5) = 0.5 * (qw * wy - qx * wz + qz * wx);
  dx(6) = 0.5 * (qw * wz + qx * wy - qy * wx);
  dx(7) = accel * 2.0 * (qx * qz + qw * qy) + params.gravity.x();
  dx(8) = accel * 2.0 * (qy * qz - qw * qx) + params.gravity.y();
  dx(9) = accel * (qw * qw - qx * qx - qy * qy + qz * qz) + params.gravity.z();
  // J^-1 (tau - w x Jw)
  dx(10) = (u.torque.x() - (wy * jz - wz * jy)) / j.x();
  dx(11) = (u.torque.y() - (wz * jx - wx * jz)) / j.y();
  dx(12) = (u.torque.z() - (wx * jy - wy * jx)) / j.z();
  return dx;
}

/// Classical fourth-order Runge-Kutta step with the wrench held constant.
/// The attitude is re-normalized once at the end of the step.
inline State rk4_step(const State& x, const WrenchCommand& u, double dt,
                      const DroneParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const State::Vector k1 = dynamics_derivative(x, u, params);
  const State::Vector k2 = dynamics_derivative(State(x.data + 0.5 * dt * k1), u, params);
  const State::Vector k3 = dynamics_derivative(State(x.data + 0.5 * dt * k2), u, params);
  const State::Vector k4 = dynamics_derivative(State(x.data + dt * k3), u, params);
  State next(x.data + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  next.normalize_attitude();
  return next;
}

}  // namespace quadmppi
