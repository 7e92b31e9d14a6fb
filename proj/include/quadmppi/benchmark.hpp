#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadmppi/config.hpp"
#include "quadmppi/mppi.hpp"
#include "quadmppi/trajectory.hpp"

namespace quadmppi {

struct BenchRow {
  int rollouts = 0;
  int horizon = 0;
  int iterations = 0;
  double mean_us = 0.0;
  double std_us = 0.0;
  double min_us = 0.0;
  double max_us = 0.0;
};

struct BenchSummary {
  std::vector<BenchRow> rows;
  bool monotone_in_rollouts = true;
  double min_r2_in_horizon = 1.0;        // worst linear fit over the K values
  std::optional<BenchRow> budget_row;    // the (896, 15) cell when it is in the grid
  double budget_ms = 10.0;
  double hard_budget_ms = 20.0;
  unsigned workers = 1;

  bool within_budget() const { return budget_row && budget_row->mean_us <= budget_ms * 1e3; }
  bool within_hard_budget() const { return budget_row && budget_row->mean_us <= hard_budget_ms * 1e3; }
};

inline constexpr int kBudgetRollouts = 896;
inline constexpr int kBudgetHorizon = 15;
inline constexpr const char* kBenchCsvHeader = "K,N,iterations,mean_us,std_us,min_us,max_us";
inline constexpr const char* kBenchSchema = "quadmppi.bench/1";

/// Mean tick time of a fresh controller for one (K, N) cell. The state and
/// reference window are frozen, so only the controller does work.
inline BenchRow time_controller(const DroneParams& drone, MppiConfig mppi, const CostWeights& weights,
                                const TrajectorySpec& trajectory, const CollisionWorld* world, int iterations,
                                int warmup_iterations) {
  mppi.record_states = false;
  MppiController controller(drone, mppi, weights);
  const State start = generate_reference(trajectory, 0.0);
  const State x = State::at_rest(start.p(), start.q());
  const ReferenceWindow window = reference_window(trajectory, 0.0, mppi.horizon, mppi.dt);

  for (int i = 0; i < warmup_iterations; ++i) controller.tick(x, window, world);

  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    controller.tick(x, window, world);
    samples.push_back(std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
  }

  BenchRow row;
  row.rollouts = mppi.rollouts;
  row.horizon = mppi.horizon;
  row.iterations = iterations;
  double sum = 0.0, sq = 0.0;
  for (double s : samples) {
    sum += s;
    sq += s * s;
  }
  const double n = static_cast<double>(samples.size());
  row.mean_us = sum / n;
  row.std_us = std::sqrt(std::max(sq / n - row.mean_us * row.mean_us, 0.0));
  row.min_us = *std::min_element(samples.begin(), samples.end());
  row.max_us = *std::max_element(samples.begin(), samples.end());
  return row;
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) return 1.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;
  if (sxx == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

/// At each N, time must not drop by more than `tolerance` when K grows.
inline bool monotone_in_rollouts(const std::vector<BenchRow>& rows, double tolerance = 0.10) {
  std::map<int, std::map<int, double>> by_n;
  for (const BenchRow& r : rows) by_n[r.horizon][r.rollouts] = r.mean_us;
  for (const auto& [n, series] : by_n) {
    double prev = -1.0;
    for (const auto& [k, t] : series) {
      if (prev >= 0.0 && t < (1.0 - tolerance) * prev) return false;
      prev = t;
    }
  }
  return true;
}

/// Worst R^2 of a linear fit of time against N, over every K in the grid.
inline double min_r2_in_horizon(const std::vector<BenchRow>& rows) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_k;
  for (const BenchRow& r : rows) {
    by_k[r.rollouts].first.push_back(r.horizon);
    by_k[r.rollouts].second.push_back(r.mean_us);
  }
  double worst = 1.0;
  for (const auto& [k, xy] : by_k) worst = std::min(worst, linear_fit_r2(xy.first, xy.second));
  return worst;
}

/// Runs the whole K x N grid. `on_row` is called after each cell so callers
/// can stream progress.
template <typename OnRow>
BenchSummary timing_benchmark(const DroneParams& drone, const MppiConfig& base, const CostWeights& weights,
                              const TrajectorySpec& trajectory, const CollisionWorld* world, const BenchConfig& bench,
                              OnRow&& on_row) {
  BenchSummary out;
  out.budget_ms = bench.budget_ms;
  out.hard_budget_ms = bench.hard_budget_ms;
  out.workers = WorkerPool(base.workers).size();
  for (int k : bench.rollouts) {
    for (int n : bench.horizons) {
      MppiConfig cfg = base;
      cfg.rollouts = k;
      cfg.horizon = n;
      const BenchRow row =
          time_controller(drone, cfg, weights, trajectory, world, bench.iterations, bench.warmup_iterations);
      if (k == kBudgetRollouts && n == kBudgetHorizon) out.budget_row = row;
      out.rows.push_back(row);
      on_row(row);
    }
  }
  out.monotone_in_rollouts = monotone_in_rollouts(out.rows);
  out.min_r2_in_horizon = min_r2_in_horizon(out.rows);
  return out;
}

inline BenchSummary timing_benchmark(const DroneParams& drone, const MppiConfig& base, const CostWeights& weights,
                                     const TrajectorySpec& trajectory, const CollisionWorld* world,
                                     const BenchConfig& bench) {
  return timing_benchmark(drone, base, weights, trajectory, world, bench, [](const BenchRow&) {});
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchCsvHeader << '\n';
  char buf[160];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.3f,%.3f,%.3f,%.3f\n", r.rollouts, r.horizon, r.iterations, r.mean_us,
                  r.std_us, r.min_us, r.max_us);
    out << buf;
  }
}

inline nlohmann::json bench_to_json(const BenchSummary& s) {
  nlohmann::json j{{"schema", kBenchSchema},
                   {"workers", s.workers},
                   {"cells", s.rows.size()},
                   {"monotone_in_K", s.monotone_in_rollouts},
                   {"min_r2_in_N", s.min_r2_in_horizon},
                   {"linear_in_N", s.min_r2_in_horizon > 0.9},
                   {"budget_ms", s.budget_ms},
                   {"hard_budget_ms", s.hard_budget_ms}};
  if (s.budget_row) {
    j["reference_cell"] = {{"K", s.budget_row->rollouts},
                           {"N", s.budget_row->horizon},
                           {"mean_ms", s.budget_row->mean_us * 1e-3},
                           {"within_budget", s.within_budget()},
                           {"within_hard_budget", s.within_hard_budget()}};
  } else {
    j["reference_cell"] = nullptr;
  }
  return j;
}

}  // namespace quadmppi
