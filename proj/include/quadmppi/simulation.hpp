#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadmppi/actuator.hpp"
#include "quadmppi/collision.hpp"
#include "quadmppi/cost.hpp"
#include "quadmppi/dynamics.hpp"
#include "quadmppi/mppi.hpp"
#include "quadmppi/trajectory.hpp"

namespace quadmppi {

struct RunConfig {
  int loops = 20;
  double plant_dt = 0.001;                // s
  double rate_time_constant = 0.03;       // s, body-rate tracking loop
  double divergence_bound = 50.0;         // m of position error
  double planning_margin = 0.0;           // m added to the drone radius inside the controller only
  std::optional<double> warmup;           // s excluded from statistics; default one loop
  std::optional<double> duration;         // s, required for hover references
  std::string output_dir = "out";
  bool diagnostics = true;

  void validate() const {
    if (loops < 1) throw std::invalid_argument("run: loops must be >= 1");
    if (!(plant_dt > 0.0)) throw std::invalid_argument("run: plant_dt must be positive");
    if (!(rate_time_constant > 0.0)) throw std::invalid_argument("run: rate_time_constant must be positive");
    if (!(divergence_bound > 0.0)) throw std::invalid_argument("run: divergence_bound must be positive");
    if (!(planning_margin >= 0.0)) throw std::invalid_argument("run: planning_margin must be >= 0");
    if (warmup && !(*warmup >= 0.0)) throw std::invalid_argument("run: warmup must be >= 0");
    if (duration && !(*duration > 0.0)) throw std::invalid_argument("run: duration must be positive");
  }
};

/// Plant: the same rigid-body model integrated finely, driven by a
/// first-order body-rate loop that turns the dispatched rates into torques,
/// with the result projected onto the rotor limits.
class RateLoopPlant {
 public:
  RateLoopPlant(const DroneParams& params, double dt, double rate_time_constant, const State& initial)
      : actuator_(params), dt_(dt), tau_(rate_time_constant), state_(initial) {}

  const State& state() const { return state_; }
  const Vec3& last_acceleration() const { return acceleration_; }

  WrenchCommand wrench_for(const BodyCommand& cmd) const {
    const DroneParams& p = actuator_.params();
    const Vec3 w = state_.w();
    const Vec3 torque = p.inertia.cwiseProduct(cmd.rates - w) / tau_ + w.cross(p.inertia.cwiseProduct(w));
    return actuator_.clip_wrench(WrenchCommand{cmd.thrust, torque});
  }

  void step(const BodyCommand& cmd) {
    const WrenchCommand u = wrench_for(cmd);
    acceleration_ = dynamics_derivative(state_, u, actuator_.params()).segment<3>(7);
    state_ = rk4_step(state_, u, dt_, actuator_.params());
  }

 private:
  ActuatorModel actuator_;
  double dt_;
  double tau_;
  State state_;
  Vec3 acceleration_ = Vec3::Zero();
};

struct TrackingReport {
  std::string trajectory;
  std::size_t ticks = 0;                  // controller ticks simulated
  std::size_t evaluated_ticks = 0;        // ticks after warm-up
  double warmup = 0.0;
  std::vector<double> position_error;     // per tick, m
  std::vector<double> iteration_time_us;  // per tick
  double mean_error = 0.0;
  double std_error = 0.0;
  double max_error = 0.0;
  double max_speed = 0.0;                 // after warm-up
  double max_accel = 0.0;                 // after warm-up
  std::size_t collisions = 0;             // plant steps in collision
  std::size_t fallback_ticks = 0;
  double mean_iteration_us = 0.0;
  double max_iteration_us = 0.0;
  double max_rollout_cost = 0.0;          // largest finite collision-free rollout cost seen
  bool diverged = false;

  bool success() const { return !diverged && collisions == 0; }
};

inline constexpr const char* kReportSchema = "quadmppi.report/1";
inline constexpr const char* kStatesCsvHeader =
    "tick,t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,ref_px,ref_py,ref_pz,err";
inline constexpr const char* kDiagCsvHeader =
    "tick,wall_time_us,best_cost,mean_cost,collision_rollout_fraction";

inline nlohmann::json report_to_json(const TrackingReport& r) {
  return {{"schema", kReportSchema},
          {"trajectory", r.trajectory},
          {"ticks", r.ticks},
          {"evaluated_ticks", r.evaluated_ticks},
          {"warmup_s", r.warmup},
          {"mean_error_m", r.mean_error},
          {"std_error_m", r.std_error},
          {"max_error_m", r.max_error},
          {"max_speed_mps", r.max_speed},
          {"max_accel_mps2", r.max_accel},
          {"collisions", r.collisions},
          {"fallback_ticks", r.fallback_ticks},
          {"mean_iteration_us", r.mean_iteration_us},
          {"max_iteration_us", r.max_iteration_us},
          {"diverged", r.diverged},
          {"success", r.success()}};
}

namespace detail {

inline void write_csv_row(std::ostream& out, std::initializer_list<double> values, long long tick) {
  char buf[32];
  out << tick;
  for (double v : values) {
    std::snprintf(buf, sizeof buf, ",%.10g", v);
    out << buf;
  }
  out << '\n';
}

}  // namespace detail

struct ClosedLoopLogs {
  std::ostream* states = nullptr;
  std::ostream* diagnostics = nullptr;
};

struct ClosedLoopSetup {
  DroneParams drone;
  MppiConfig mppi;
  CostWeights weights;
  TrajectorySpec trajectory;
  std::optional<CollisionWorld> world;
  RunConfig run;
};

/// Number of controller ticks for the configured run length.
inline std::size_t closed_loop_ticks(const ClosedLoopSetup& setup) {
  const auto period = trajectory_period(setup.trajectory);
  const double total = period ? setup.run.loops * *period : setup.run.duration.value_or(0.0);
  if (!(total > 0.0)) throw std::invalid_argument("run: hover references need a positive duration");
  return static_cast<std::size_t>(std::llround(total / setup.mppi.controller_dt()));
}

/// Simulates plant and controller together. The controller ticks every
/// dt / n_interp; the plant integrates at plant_dt with the last command held.
/// Error statistics skip the warm-up window (one loop by default).
inline TrackingReport run_closed_loop(const ClosedLoopSetup& setup, const ClosedLoopLogs& logs = {}) {
  setup.drone.validate();
  setup.mppi.validate();
  setup.weights.validate();
  setup.run.validate();
  validate_trajectory(setup.trajectory);

  const double ctrl_dt = setup.mppi.controller_dt();
  const double ratio = ctrl_dt / setup.run.plant_dt;
  const long substeps = std::lround(ratio);
  if (substeps < 1 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio) {
    throw std::invalid_argument("run: plant_dt must divide the controller period dt / n_interp");
  }
  const std::size_t ticks = closed_loop_ticks(setup);
  const auto period = trajectory_period(setup.trajectory);
  const double warmup = setup.run.warmup.value_or(period.value_or(0.0));

  // The plant is judged against the true drone radius; the controller may
  // plan against a fattened copy.
  const CollisionWorld* world = (setup.world && !setup.world->empty()) ? &*setup.world : nullptr;
  std::optional<CollisionWorld> planning_world;
  if (world && setup.run.planning_margin > 0.0) {
    planning_world = world->with_drone_radius(world->drone_radius() + setup.run.planning_margin);
  }
  const CollisionWorld* controller_world = planning_world ? &*planning_world : world;
  MppiController controller(setup.drone, setup.mppi, setup.weights);
  const State start = generate_reference(setup.trajectory, 0.0);
  RateLoopPlant plant(setup.drone, setup.run.plant_dt, setup.run.rate_time_constant,
                      State::at_rest(start.p(), start.q()));

  TrackingReport report;
  report.trajectory = trajectory_name(setup.trajectory);
  report.warmup = warmup;
  report.position_error.reserve(ticks);
  report.iteration_time_us.reserve(ticks);

  if (logs.states) *logs.states << kStatesCsvHeader << '\n';
  if (logs.diagnostics) *logs.diagnostics << kDiagCsvHeader << '\n';

  double err_sum = 0.0;
  double err_sq = 0.0;
  const int horizon = setup.mppi.horizon;

  for (std::size_t tick = 0; tick < ticks; ++tick) {
    const double t = static_cast<double>(tick) * ctrl_dt;
    const ReferenceWindow window = reference_window(setup.trajectory, t, horizon, setup.mppi.dt);
    const State& x = plant.state();
    const TickResult res = controller.tick(x, window, controller_world);
    const TickDiagnostics& d = res.diagnostics;

    const double err = (x.p() - window[0].p()).norm();
    report.position_error.push_back(err);
    report.iteration_time_us.push_back(d.wall_time_us);
    report.ticks = tick + 1;
    if (d.fallback) ++report.fallback_ticks;

    const bool evaluated = t >= warmup - 1e-9;
    if (evaluated) {
      ++report.evaluated_ticks;
      err_sum += err;
      err_sq += err * err;
      report.max_error = std::max(report.max_error, err);
      report.max_speed = std::max(report.max_speed, x.v().norm());
    }
    const auto& batch = controller.last_batch();
    for (std::size_t k = 0; k < batch.rollouts; ++k) {
      if (batch.collisions[k] == 0 && std::isfinite(batch.costs[k])) {
        report.max_rollout_cost = std::max(report.max_rollout_cost, batch.costs[k]);
      }
    }

    if (logs.states) {
      const Vec3 p = x.p(), v = x.v(), w = x.w(), rp = window[0].p();
      const Quat q = x.q();
      detail::write_csv_row(*logs.states,
                            {t, p.x(), p.y(), p.z(), q(0), q(1), q(2), q(3), v.x(), v.y(), v.z(), w.x(), w.y(),
                             w.z(), rp.x(), rp.y(), rp.z(), err},
                            static_cast<long long>(tick));
    }
    if (logs.diagnostics) {
      detail::write_csv_row(*logs.diagnostics,
                            {d.wall_time_us, d.best_cost, d.mean_cost, d.collision_rollout_fraction},
                            static_cast<long long>(tick));
    }

    if (!std::isfinite(err) || err > setup.run.divergence_bound) {
      report.diverged = true;
      break;
    }

    for (long s = 0; s < substeps; ++s) {
      plant.step(res.command);
      if (world && world->is_colliding(plant.state().p())) ++report.collisions;
      if (evaluated) report.max_accel = std::max(report.max_accel, plant.last_acceleration().norm());
    }
  }

  if (report.evaluated_ticks > 0) {
    const double n = static_cast<double>(report.evaluated_ticks);
    report.mean_error = err_sum / n;
    report.std_error = std::sqrt(std::max(err_sq / n - report.mean_error * report.mean_error, 0.0));
  }
  double it_sum = 0.0;
  for (double us : report.iteration_time_us) {
    it_sum += us;
    report.max_iteration_us = std::max(report.max_iteration_us, us);
  }
  if (!report.iteration_time_us.empty()) {
    report.mean_iteration_us = it_sum / static_cast<double>(report.iteration_time_us.size());
  }
  return report;
}

}  // namespace quadmppi
