#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "quadmppi/cost.hpp"
#include "quadmppi/dynamics.hpp"

namespace quadmppi {

/// Position and its first two time derivatives on an analytic path.
struct PathSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

struct HoverSpec {
  Vec3 position{0.0, 0.0, 2.0};
  double yaw = 0.0;
};

/// Back-and-forth between two points. Each leg ramps up with a half-sine
/// acceleration pulse, cruises at the peak speed, and ramps down the same way.
struct LineSpec {
  Vec3 start{-10.0, 0.0, 3.0};
  Vec3 end{10.0, 0.0, 3.0};
  double peak_speed = 12.271;
  double peak_accel = 19.782;
};

/// Horizontal circle flown counter-clockwise at constant angular rate.
struct CircleSpec {
  Vec3 center{0.0, 0.0, 3.0};
  double radius = 10.0;
  double period = 7.5;
};

/// Circle tilted about the world x axis by `tilt` radians.
struct SlantedCircleSpec {
  CircleSpec circle;
  double tilt = std::numbers::pi / 6.0;
};

/// Lemniscate of Gerono: x = a sin(phi), y = (a / 2) sin(2 phi).
struct EightSpec {
  Vec3 center{0.0, 0.0, 3.0};
  double half_width = 11.0;
  double period = 11.0;
};

using TrajectorySpec = std::variant<HoverSpec, LineSpec, CircleSpec, SlantedCircleSpec, EightSpec>;

/// Circle radius and period giving constant speed v and centripetal accel a.
inline CircleSpec circle_from_peaks(const Vec3& center, double speed, double accel) {
  return CircleSpec{center, speed * speed / accel, 2.0 * std::numbers::pi * speed / accel};
}

// On the Gerono eight, max |v| = sqrt(2) a Omega (at the crossing) and
// max |acc| = (17 / 8) a Omega^2 (where sin^2(phi) = 17 / 32).
inline constexpr double kEightSpeedFactor = std::numbers::sqrt2;
inline constexpr double kEightAccelFactor = 17.0 / 8.0;

inline EightSpec eight_from_peaks(const Vec3& center, double speed, double accel) {
  const double omega = (accel / kEightAccelFactor) / (speed / kEightSpeedFactor);
  return EightSpec{center, speed / (kEightSpeedFactor * omega), 2.0 * std::numbers::pi / omega};
}

namespace detail {

struct LineProfile {
  double length;
  double ramp_time;     // duration of one half-sine pulse
  double ramp_dist;
  double cruise_time;
  double leg_time;
};

inline LineProfile line_profile(const LineSpec& s) {
  LineProfile prof{};
  prof.length = (s.end - s.start).norm();
  prof.ramp_time = std::numbers::pi * s.peak_speed / (2.0 * s.peak_accel);
  prof.ramp_dist = s.peak_accel * prof.ramp_time * prof.ramp_time / std::numbers::pi;
  prof.cruise_time = (prof.length - 2.0 * prof.ramp_dist) / s.peak_speed;
  prof.leg_time = 2.0 * prof.ramp_time + prof.cruise_time;
  return prof;
}

/// Distance, speed and acceleration along one leg at time tau in [0, leg_time].
inline Eigen::Vector3d line_leg(const LineSpec& s, const LineProfile& prof, double tau) {
  const double amax = s.peak_accel;
  const double ta = prof.ramp_time;
  const double k = std::numbers::pi / ta;
  auto ramp = [&](double t) {
    return Eigen::Vector3d(amax / k * (t - std::sin(k * t) / k), amax / k * (1.0 - std::cos(k * t)),
                           amax * std::sin(k * t));
  };
  if (tau <= ta) return ramp(tau);
  if (tau <= ta + prof.cruise_time) {
    return Eigen::Vector3d(prof.ramp_dist + s.peak_speed * (tau - ta), s.peak_speed, 0.0);
  }
  const Eigen::Vector3d r = ramp(std::max(prof.leg_time - tau, 0.0));
  return Eigen::Vector3d(prof.length - r(0), r(1), -r(2));
}

inline PathSample circle_sample(const CircleSpec& c, double t) {
  const double omega = 2.0 * std::numbers::pi / c.period;
  const double phi = omega * t;
  const double cs = std::cos(phi), sn = std::sin(phi);
  PathSample s;
  s.position = c.center + c.radius * Vec3(cs, sn, 0.0);
  s.velocity = c.radius * omega * Vec3(-sn, cs, 0.0);
  s.acceleration = -c.radius * omega * omega * Vec3(cs, sn, 0.0);
  return s;
}

}  // namespace detail

inline void validate_trajectory(const TrajectorySpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        auto fail = [](const std::string& what) { throw std::invalid_argument("trajectory: " + what); };
        auto check_circle = [&](const CircleSpec& c) {
          if (!(c.radius > 0.0)) fail("radius must be positive");
          if (!(c.period > 0.0)) fail("period must be positive");
          if (!c.center.allFinite()) fail("center must be finite");
        };
        if constexpr (std::is_same_v<T, HoverSpec>) {
          if (!s.position.allFinite()) fail("hover position must be finite");
        } else if constexpr (std::is_same_v<T, LineSpec>) {
          if (!(s.peak_speed > 0.0) || !(s.peak_accel > 0.0)) fail("line peak speed and accel must be positive");
          const auto prof = detail::line_profile(s);
          if (!(prof.length > 0.0)) fail("line endpoints must differ");
          if (prof.cruise_time < 0.0) {
            fail("line is too short to reach its peak speed (need >= " +
                 std::to_string(2.0 * prof.ramp_dist) + " m)");
          }
        } else if constexpr (std::is_same_v<T, CircleSpec>) {
          check_circle(s);
        } else if constexpr (std::is_same_v<T, SlantedCircleSpec>) {
          check_circle(s.circle);
          if (!std::isfinite(s.tilt)) fail("tilt must be finite");
        } else {
          if (!(s.half_width > 0.0)) fail("eight half width must be positive");
          if (!(s.period > 0.0)) fail("eight period must be positive");
        }
      },
      spec);
}

/// Time for one full loop; nullopt for hover.
inline std::optional<double> trajectory_period(const TrajectorySpec& spec) {
  return std::visit(
      [](const auto& s) -> std::optional<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HoverSpec>) {
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, LineSpec>) {
          return 2.0 * detail::line_profile(s).leg_time;
        } else if constexpr (std::is_same_v<T, SlantedCircleSpec>) {
          return s.circle.period;
        } else {
          return s.period;
        }
      },
      spec);
}

inline std::string trajectory_name(const TrajectorySpec& spec) {
  static constexpr const char* names[] = {"hover", "line", "circle", "slanted_circle", "eight"};
  return names[spec.index()];
}

inline PathSample sample_path(const TrajectorySpec& spec, double t) {
  return std::visit(
      [t](const auto& s) -> PathSample {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HoverSpec>) {
          return PathSample{s.position, Vec3::Zero(), Vec3::Zero()};
        } else if constexpr (std::is_same_v<T, LineSpec>) {
          const auto prof = detail::line_profile(s);
          const Vec3 dir = (s.end - s.start) / prof.length;
          const double tl = std::fmod(t, 2.0 * prof.leg_time);
          PathSample out;
          if (tl < prof.leg_time) {
            const Eigen::Vector3d leg = detail::line_leg(s, prof, tl);
            out.position = s.start + leg(0) * dir;
            out.velocity = leg(1) * dir;
            out.acceleration = leg(2) * dir;
          } else {
            const Eigen::Vector3d leg = detail::line_leg(s, prof, tl - prof.leg_time);
            out.position = s.end - leg(0) * dir;
            out.velocity = -leg(1) * dir;
            out.acceleration = -leg(2) * dir;
          }
          return out;
        } else if constexpr (std::is_same_v<T, CircleSpec>) {
          return detail::circle_sample(s, t);
        } else if constexpr (std::is_same_v<T, SlantedCircleSpec>) {
          // Rotate the planar circle (relative to its center) about x.
          CircleSpec flat = s.circle;
          flat.center = Vec3::Zero();
          const PathSample p = detail::circle_sample(flat, t);
          const double c = std::cos(s.tilt), sn = std::sin(s.tilt);
          Mat3 rot;
          rot << 1.0, 0.0, 0.0, 0.0, c, -sn, 0.0, sn, c;
          return PathSample{s.circle.center + rot * p.position, rot * p.velocity, rot * p.acceleration};
        } else {
          const double omega = 2.0 * std::numbers::pi / s.period;
          const double phi = omega * t;
          const double a = s.half_width;
          PathSample out;
          out.position = s.center + Vec3(a * std::sin(phi), 0.5 * a * std::sin(2.0 * phi), 0.0);
          out.velocity = Vec3(a * omega * std::cos(phi), a * omega * std::cos(2.0 * phi), 0.0);
          out.acceleration =
              Vec3(-a * omega * omega * std::sin(phi), -2.0 * a * omega * omega * std::sin(2.0 * phi), 0.0);
          return out;
        }
      },
      spec);
}

/// Reference heading: tangent to the path for circles, along the line for
/// line, fixed for hover and eight.
inline double reference_yaw(const TrajectorySpec& spec, const PathSample& sample) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HoverSpec>) {
          return s.yaw;
        } else if constexpr (std::is_same_v<T, LineSpec>) {
          const Vec3 d = s.end - s.start;
          return (std::hypot(d.x(), d.y()) > 1e-9) ? std::atan2(d.y(), d.x()) : 0.0;
        } else if constexpr (std::is_same_v<T, CircleSpec> || std::is_same_v<T, SlantedCircleSpec>) {
          return std::atan2(sample.velocity.y(), sample.velocity.x());
        } else {
          return 0.0;
        }
      },
      spec);
}

/// Reference state at time t: on-path position and velocity, level attitude
/// with the reference heading, zero body rates.
inline State generate_reference(const TrajectorySpec& spec, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("generate_reference: t must be >= 0");
  const PathSample s = sample_path(spec, t);
  State ref = State::at_rest(s.position, quat_from_yaw(reference_yaw(spec, s)));
  ref.v() = s.velocity;
  return ref;
}

/// N + 1 reference states at t + j dt.
inline ReferenceWindow reference_window(const TrajectorySpec& spec, double t, int horizon, double dt) {
  ReferenceWindow window;
  window.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int j = 0; j <= horizon; ++j) window.push_back(generate_reference(spec, t + j * dt));
  return window;
}

}  // namespace quadmppi
