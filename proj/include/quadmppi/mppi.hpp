#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadmppi/actuator.hpp"
#include "quadmppi/collision.hpp"
#include "quadmppi/cost.hpp"
#include "quadmppi/dynamics.hpp"
#include "quadmppi/random.hpp"
#include "quadmppi/worker_pool.hpp"

namespace quadmppi {

/// How the nominal advances between prediction knots.
///  Phase: knots stay put for n ticks while the dispatched command blends
///         u_0 toward u_1; then they shift by one.
///  Resample: every tick each knot moves 1/n of the way toward its
///         successor, so knot 0 is always the command for the current tick.
enum class ShiftMode { Phase, Resample };

struct MppiConfig {
  int rollouts = 896;                 // K
  int horizon = 15;                   // N
  double dt = 0.1;                    // prediction step, s
  int interpolation_steps = 10;       // controller ticks per prediction step
  double lambda = 1e-4;               // softmax temperature
  Vec4 sigma{0.60, 0.15, 0.15, 0.05}; // per-channel noise variance [F_t, w_x, w_y, w_z]
  std::optional<BodyCommand> u_init;  // hover thrust with zero rates when unset
  std::uint64_t seed = 0;
  unsigned workers = 0;               // 0: hardware concurrency
  bool record_states = false;         // keep all K x (N+1) rollout states
  ShiftMode shift = ShiftMode::Phase;

  double controller_dt() const { return dt / interpolation_steps; }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("MppiConfig: " + what); };
    if (rollouts < 1) fail("K must be >= 1");
    if (horizon < 1) fail("N must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
    if (interpolation_steps < 1) fail("n_interp must be >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be positive");
    if (!(sigma.array() > 0.0).all() || !sigma.allFinite()) fail("Sigma entries must be positive");
    if (u_init && (!std::isfinite(u_init->thrust) || !u_init->rates.allFinite())) fail("u_init must be finite");
  }
};

inline BodyCommand hover_command(const DroneParams& params) {
  return BodyCommand{params.hover_thrust(), Vec3::Zero()};
}

/// Everything produced by one batch of K rollouts. Rollout k owns the
/// contiguous slices [k*N, (k+1)*N) of the per-step arrays.
struct RolloutBatch {
  std::size_t rollouts = 0;
  std::size_t horizon = 0;
  std::vector<Vec4> disturbances;      // K x N
  std::vector<BodyCommand> controls;   // K x N, clipped inputs that drove the rollout
  std::vector<State> states;           // K x (N+1), empty unless recorded
  std::vector<double> costs;           // K, +inf marks a numerically exploded rollout
  std::vector<std::uint32_t> collisions;  // K, colliding states per rollout

  void resize(std::size_t k, std::size_t n, bool record_states) {
    rollouts = k;
    horizon = n;
    disturbances.assign(k * n, Vec4::Zero());
    controls.assign(k * n, BodyCommand{});
    states.assign(record_states ? k * (n + 1) : 0, State{});
    costs.assign(k, 0.0);
    collisions.assign(k, 0);
  }

  bool has_states() const { return !states.empty(); }

  std::span<Vec4> disturbance(std::size_t k) { return {disturbances.data() + k * horizon, horizon}; }
  std::span<const Vec4> disturbance(std::size_t k) const {
    return {disturbances.data() + k * horizon, horizon};
  }
  std::span<BodyCommand> control(std::size_t k) { return {controls.data() + k * horizon, horizon}; }
  std::span<const BodyCommand> control(std::size_t k) const {
    return {controls.data() + k * horizon, horizon};
  }
  std::span<State> trajectory(std::size_t k) { return {states.data() + k * (horizon + 1), horizon + 1}; }
  std::span<const State> trajectory(std::size_t k) const {
    return {states.data() + k * (horizon + 1), horizon + 1};
  }
};

/// Softmax weights over rollouts; sums to one.
struct RolloutWeights {
  std::vector<double> values;

  double entropy() const {
    double h = 0.0;
    for (double w : values) {
      if (w > 0.0) h -= w * std::log(w);
    }
    return h;
  }
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Noise for rollout k: delta_j ~ N(0, diag(sigma)). Each (seed, iteration, k)
/// is its own counter-based stream, so the result is independent of which
/// thread draws it.
inline void sample_rollout_disturbances(const MppiConfig& config, std::uint64_t iteration,
                                        std::uint32_t rollout, std::span<Vec4> out) {
  const Vec4 stddev = config.sigma.cwiseSqrt();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto z = standard_normal4(config.seed, iteration, rollout, static_cast<std::uint32_t>(j));
    out[j] = Vec4(z[0], z[1], z[2], z[3]).cwiseProduct(stddev);
  }
}

inline void sample_disturbances(const MppiConfig& config, std::uint64_t iteration, RolloutBatch& batch) {
  for (std::size_t k = 0; k < batch.rollouts; ++k) {
    sample_rollout_disturbances(config, iteration, static_cast<std::uint32_t>(k), batch.disturbance(k));
  }
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Inputs shared by every rollout of one iteration. All read-only.
struct RolloutContext {
  const ActuatorModel& actuator;
  const MppiConfig& config;
  const CostWeights& weights;
  const ReferenceWindow& reference;     // N + 1 entries
  const CollisionWorld* world = nullptr;
};

/// Simulates rollout k from x_hat under nominal + disturbance, storing the
/// clipped controls (and states when the batch records them), and returns
/// the rollout cost. The cost terms are accumulated in the same order as
/// input_cost / reference_cost / obstacle_cost, so it equals compute_cost on
/// the stored trajectory exactly.
inline double simulate_rollout(std::size_t k, const State& x_hat, std::span<const BodyCommand> nominal,
                               const RolloutContext& ctx, RolloutBatch& batch) {
  const std::size_t n = batch.horizon;
  const auto delta = batch.disturbance(k);
  const auto controls = batch.control(k);
  const DroneParams& params = ctx.actuator.params();
  const CostWeights& w = ctx.weights;
  const bool record = batch.has_states();

  State x = x_hat;
  if (record) batch.trajectory(k)[0] = x;

  double magnitude = 0.0;
  double change = 0.0;
  double tracking = stage_reference_cost(x, ctx.reference[0], w);
  std::uint32_t hits = (ctx.world && ctx.world->is_colliding(x.p())) ? 1 : 0;
  bool exploded = false;

  for (std::size_t j = 0; j < n; ++j) {
    const BodyCommand raw = BodyCommand::from_vector(nominal[j].as_vector() + delta[j]);
    const FeasibleCommand u = ctx.actuator.clip_and_reconstruct(x, apply_rate_limits(raw, params), ctx.config.dt);
    controls[j] = u.body;
    magnitude += stage_input_cost(u.body, w);
    if (j > 0) change += stage_input_change_cost(controls[j], controls[j - 1], w);

    const Vec3 previous = x.p();
    x = rk4_step(x, u.wrench, ctx.config.dt, params);
    if (record) batch.trajectory(k)[j + 1] = x;
    if (!x.is_finite()) {
      exploded = true;
      for (std::size_t r = j + 1; r < n; ++r) controls[r] = u.body;
      if (record) {
        for (std::size_t r = j + 2; r <= n; ++r) batch.trajectory(k)[r] = x;
      }
      break;
    }
    tracking += stage_reference_cost(x, ctx.reference[j + 1], w);
    if (ctx.world && ctx.world->segment_colliding(previous, x.p())) ++hits;
  }

  batch.collisions[k] = hits;
  const double obstacles = ctx.world ? w.obstacle * static_cast<double>(hits) : 0.0;
  const double cost = (magnitude + change) + tracking + obstacles;
  batch.costs[k] = (exploded || !std::isfinite(cost)) ? std::numeric_limits<double>::infinity() : cost;
  return batch.costs[k];
}

inline void simulate_rollouts(const State& x_hat, std::span<const BodyCommand> nominal,
                              const RolloutContext& ctx, RolloutBatch& batch, WorkerPool* pool = nullptr) {
  if (nominal.size() != batch.horizon || ctx.reference.size() != batch.horizon + 1) {
    throw std::invalid_argument("simulate_rollouts: nominal must have N entries and reference N + 1");
  }
  auto body = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) simulate_rollout(k, x_hat, nominal, ctx, batch);
  };
  if (pool) {
    pool->parallel_for(batch.rollouts, body);
  } else {
    body(0, batch.rollouts);
  }
}

// ---------------------------------------------------------------------------
// Weighting and update
// ---------------------------------------------------------------------------

/// w_k = exp(-(S_k - rho) / lambda) / eta with rho the minimum finite cost.
/// Non-finite costs get weight zero. Returns nullopt when no cost is finite.
inline std::optional<RolloutWeights> compute_weights(std::span<const double> costs, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("compute_weights: lambda must be positive");
  double rho = std::numeric_limits<double>::infinity();
  for (double s : costs) {
    if (std::isfinite(s)) rho = std::min(rho, s);
  }
  if (!std::isfinite(rho)) return std::nullopt;

  RolloutWeights out;
  out.values.resize(costs.size());
  double eta = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const double e = std::isfinite(costs[k]) ? std::exp(-(costs[k] - rho) / lambda) : 0.0;
    out.values[k] = e;
    eta += e;
  }
  for (double& w : out.values) w /= eta;
  return out;
}

/// u_nom_j += sum_k w_k delta_j^k
inline void update_nominal(std::span<BodyCommand> nominal, const RolloutBatch& batch,
                           const RolloutWeights& weights) {
  if (nominal.size() != batch.horizon || weights.values.size() != batch.rollouts) {
    throw std::invalid_argument("update_nominal: shape mismatch");
  }
  for (std::size_t j = 0; j < nominal.size(); ++j) {
    Vec4 step = Vec4::Zero();
    for (std::size_t k = 0; k < batch.rollouts; ++k) {
      const double w = weights.values[k];
      if (w != 0.0) step += w * batch.disturbances[k * batch.horizon + j];
    }
    nominal[j] = BodyCommand::from_vector(nominal[j].as_vector() + step);
  }
}

// ---------------------------------------------------------------------------
// Nominal schedule with interpolation between prediction knots
// ---------------------------------------------------------------------------

/// N control knots spaced one prediction step apart, consumed at the faster
/// controller rate. At phase p the dispatched command is the linear blend
/// u_0 + (p / n) (u_1 - u_0); after n ticks the knots shift by one and the
/// freed last knot is re-initialized.
class NominalSchedule {
 public:
  NominalSchedule(int horizon, int interpolation_steps, const BodyCommand& init,
                  ShiftMode mode = ShiftMode::Phase)
      : knots_(static_cast<std::size_t>(horizon), init), steps_(interpolation_steps), init_(init), mode_(mode) {
    if (horizon < 1 || interpolation_steps < 1) {
      throw std::invalid_argument("NominalSchedule: horizon and interpolation steps must be >= 1");
    }
  }

  std::span<BodyCommand> knots() { return knots_; }
  std::span<const BodyCommand> knots() const { return knots_; }
  int phase() const { return phase_; }
  int interpolation_steps() const { return steps_; }
  const BodyCommand& init() const { return init_; }
  ShiftMode mode() const { return mode_; }

  BodyCommand current() const {
    if (mode_ == ShiftMode::Resample || phase_ == 0 || knots_.size() < 2) return knots_[0];
    const double s = static_cast<double>(phase_) / steps_;
    const Vec4 a = knots_[0].as_vector();
    const Vec4 b = knots_[1].as_vector();
    return BodyCommand::from_vector(a + s * (b - a));
  }

  /// One controller tick.
  void advance() {
    if (mode_ == ShiftMode::Resample) {
      resample_step();
      if (++phase_ == steps_) phase_ = 0;
      return;
    }
    if (++phase_ < steps_) return;
    phase_ = 0;
    std::rotate(knots_.begin(), knots_.begin() + 1, knots_.end());
    knots_.back() = init_;
  }

  void reset() {
    std::fill(knots_.begin(), knots_.end(), init_);
    phase_ = 0;
  }

 private:
  void resample_step() {
    const double s = 1.0 / steps_;
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      const Vec4 a = knots_[j].as_vector();
      const Vec4 b = j + 1 < knots_.size() ? knots_[j + 1].as_vector() : init_.as_vector();
      knots_[j] = BodyCommand::from_vector(a + s * (b - a));
    }
  }

  std::vector<BodyCommand> knots_;
  int steps_;
  int phase_ = 0;
  BodyCommand init_;
  ShiftMode mode_;
};

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

struct TickDiagnostics {
  std::uint64_t iteration = 0;
  double wall_time_us = 0.0;
  double best_cost = 0.0;
  double mean_cost = 0.0;           // over finite costs
  double worst_cost = 0.0;          // over finite costs
  double weight_entropy = 0.0;
  double collision_rollout_fraction = 0.0;
  std::size_t finite_rollouts = 0;
  bool fallback = false;            // no finite rollout; previous command re-sent
};

struct TickResult {
  BodyCommand command;              // feasible command for the rate loop
  TickDiagnostics diagnostics;
};

/// One MPPI control loop. Single owner; the K rollouts of a tick are spread
/// over an internal worker pool and joined before weighting.
class MppiController {
 public:
  MppiController(const DroneParams& params, MppiConfig config, CostWeights weights)
      : actuator_(params),
        config_(std::move(config)),
        weights_(std::move(weights)),
        schedule_(config_.horizon, config_.interpolation_steps, config_.u_init.value_or(hover_command(params)),
                  config_.shift),
        pool_(std::make_unique<WorkerPool>(config_.workers)) {
    config_.validate();
    weights_.validate();
    config_.u_init = schedule_.init();
    project_knots();
    last_command_ = schedule_.current();
    batch_.resize(static_cast<std::size_t>(config_.rollouts), static_cast<std::size_t>(config_.horizon),
                  config_.record_states);
  }

  const MppiConfig& config() const { return config_; }
  const CostWeights& weights() const { return weights_; }
  const ActuatorModel& actuator() const { return actuator_; }
  const NominalSchedule& schedule() const { return schedule_; }
  const RolloutBatch& last_batch() const { return batch_; }
  std::uint64_t iteration() const { return iteration_; }
  unsigned workers() const { return pool_->size(); }

  void reset() {
    schedule_.reset();
    project_knots();
    iteration_ = 0;
    last_command_ = schedule_.current();
  }

  /// One full iteration: sample, simulate and score K rollouts, reweight,
  /// update the nominal, dispatch the interpolated feasible command, advance.
  TickResult tick(const State& x_hat, const ReferenceWindow& reference, const CollisionWorld* world = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    if (reference.size() != static_cast<std::size_t>(config_.horizon) + 1) {
      throw std::invalid_argument("MppiController::tick: reference window must have N + 1 states");
    }
    if (world && world->empty()) world = nullptr;

    const RolloutContext ctx{actuator_, config_, weights_, reference, world};
    const std::span<const BodyCommand> nominal = schedule_.knots();
    pool_->parallel_for(batch_.rollouts, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        sample_rollout_disturbances(config_, iteration_, static_cast<std::uint32_t>(k), batch_.disturbance(k));
        simulate_rollout(k, x_hat, nominal, ctx, batch_);
      }
    });

    TickResult result;
    TickDiagnostics& diag = result.diagnostics;
    diag.iteration = iteration_;
    summarize_costs(diag);

    const auto weights = compute_weights(batch_.costs, config_.lambda);
    if (weights) {
      update_nominal(schedule_.knots(), batch_, *weights);
      project_knots();
      diag.weight_entropy = weights->entropy();
      const BodyCommand limited = apply_rate_limits(schedule_.current(), actuator_.params());
      last_command_ = actuator_.clip_and_reconstruct(x_hat, limited, config_.dt).body;
    } else {
      diag.fallback = true;
    }
    result.command = last_command_;

    schedule_.advance();
    ++iteration_;
    diag.wall_time_us =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

 private:
  /// Keeps the knots inside the actuator envelope so the unpenalized part of
  /// an update cannot drift without bound.
  void project_knots() {
    const DroneParams& p = actuator_.params();
    for (BodyCommand& u : schedule_.knots()) {
      u = apply_rate_limits(u, p);
      u.thrust = std::clamp(u.thrust, 4.0 * p.thrust_min, 4.0 * p.thrust_max);
    }
  }

  void summarize_costs(TickDiagnostics& diag) const {
    double best = std::numeric_limits<double>::infinity();
    double worst = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t finite = 0;
    std::size_t colliding = 0;
    for (std::size_t k = 0; k < batch_.rollouts; ++k) {
      const double c = batch_.costs[k];
      if (batch_.collisions[k] > 0) ++colliding;
      if (!std::isfinite(c)) continue;
      ++finite;
      sum += c;
      best = std::min(best, c);
      worst = std::max(worst, c);
    }
    diag.finite_rollouts = finite;
    diag.best_cost = best;
    diag.worst_cost = worst;
    diag.mean_cost = finite ? sum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
    diag.collision_rollout_fraction = static_cast<double>(colliding) / static_cast<double>(batch_.rollouts);
  }

  ActuatorModel actuator_;
  MppiConfig config_;
  CostWeights weights_;
  NominalSchedule schedule_;
  std::unique_ptr<WorkerPool> pool_;
  RolloutBatch batch_;
  BodyCommand last_command_;
  std::uint64_t iteration_ = 0;
};

}  // namespace quadmppi
