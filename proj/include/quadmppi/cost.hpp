#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadmppi/actuator.hpp"
#include "quadmppi/collision.hpp"

namespace quadmppi {

namespace detail {

/// <a, b>^2 / (|a|^2 |b|^2). Both norms come from the same dot products as
/// the numerator, so b = +-a yields exactly 1.
inline double quat_cos2(const Quat& a, const Quat& b) {
  const double c = quat_inner(a, b);
  return (c * c) / (quat_inner(a, a) * quat_inner(b, b));
}

}  // namespace detail

/// Angle between two orientations, sign invariant, in [0, pi].
inline double quat_angle(const Quat& a, const Quat& b) {
  return std::acos(std::clamp(2.0 * detail::quat_cos2(a, b) - 1.0, -1.0, 1.0));
}

/// 1 - <a, b>^2: cheap sign-invariant surrogate of quat_angle, in [0, 1].
inline double quat_dist_approx(const Quat& a, const Quat& b) {
  return std::max(1.0 - detail::quat_cos2(a, b), 0.0);
}

/// Plain R^4 distance; not a metric on rotations (shown for comparison only).
inline double quat_dist_euclidean(const Quat& a, const Quat& b) { return (a - b).norm(); }

enum class QuatMetric { Approx, Angle };

inline double quat_distance(QuatMetric metric, const Quat& a, const Quat& b) {
  return metric == QuatMetric::Angle ? quat_angle(a, b) : quat_dist_approx(a, b);
}

struct CostWeights {
  Vec4 input{0.01, 0.05, 0.05, 0.10};        // R diagonal, [F_t, w_x, w_y, w_z]
  Vec4 input_change{0.05, 0.10, 0.10, 0.30}; // R_delta diagonal
  double position = 400.0;                   // c_p
  double velocity = 40.0;                    // c_v
  double attitude = 20.0;                    // c_q
  double rates = 20.0;                       // c_w
  double obstacle = 1e6;                     // c_obs
  QuatMetric metric = QuatMetric::Approx;

  void validate() const {
    auto ok = [](double x) { return std::isfinite(x) && x >= 0.0; };
    if (!(input.array() >= 0.0).all() || !input.allFinite() || !(input_change.array() >= 0.0).all() ||
        !input_change.allFinite()) {
      throw std::invalid_argument("CostWeights: R and R_delta diagonals must be >= 0");
    }
    if (!ok(position) || !ok(velocity) || !ok(attitude) || !ok(rates) || !ok(obstacle)) {
      throw std::invalid_argument("CostWeights: scalar weights must be >= 0");
    }
  }
};

/// Reference states on the prediction grid, one per rollout state (N + 1).
using ReferenceWindow = std::vector<State>;

// Per-stage terms. The batch functions below and the fused rollout loop both
// accumulate these in the same order so their sums agree bit for bit.

inline double stage_input_cost(const BodyCommand& u, const CostWeights& w) {
  const Vec4 v = u.as_vector();
  return v.dot(w.input.cwiseProduct(v));
}

inline double stage_input_change_cost(const BodyCommand& u_next, const BodyCommand& u,
                                      const CostWeights& w) {
  const Vec4 d = u_next.as_vector() - u.as_vector();
  return d.dot(w.input_change.cwiseProduct(d));
}

inline double stage_reference_cost(const State& x, const State& ref, const CostWeights& w) {
  const double dq = quat_distance(w.metric, x.q(), ref.q());
  return w.position * (x.p() - ref.p()).squaredNorm() + w.attitude * dq * dq +
         w.velocity * (x.v() - ref.v()).squaredNorm() + w.rates * (x.w() - ref.w()).squaredNorm();
}

/// sum_j ||u_j||_R^2 over the N inputs plus sum_j ||u_{j+1} - u_j||_Rdelta^2
/// over the N - 1 differences.
inline double input_cost(std::span<const BodyCommand> u, const CostWeights& w) {
  if (u.empty()) throw std::invalid_argument("input_cost: empty control sequence");
  double magnitude = 0.0;
  for (const BodyCommand& c : u) magnitude += stage_input_cost(c, w);
  double change = 0.0;
  for (std::size_t j = 0; j + 1 < u.size(); ++j) change += stage_input_change_cost(u[j + 1], u[j], w);
  return magnitude + change;
}

inline double reference_cost(std::span<const State> x, std::span<const State> ref,
                             const CostWeights& w) {
  if (x.size() != ref.size()) throw std::invalid_argument("reference_cost: length mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) total += stage_reference_cost(x[j], ref[j], w);
  return total;
}

inline double obstacle_cost(std::span<const State> x, const CollisionWorld& world,
                            const CostWeights& w) {
  return w.obstacle * static_cast<double>(world.rollout_collision_count(x));
}

inline double compute_cost(std::span<const State> x, std::span<const BodyCommand> u,
                           std::span<const State> ref, const CollisionWorld* world,
                           const CostWeights& w) {
  if (x.size() != u.size() + 1) throw std::invalid_argument("compute_cost: need N + 1 states for N inputs");
  const double obstacles = world ? obstacle_cost(x, *world, w) : 0.0;
  return input_cost(u, w) + reference_cost(x, ref, w) + obstacles;
}

}  // namespace quadmppi
