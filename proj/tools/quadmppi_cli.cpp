// Command-line front end: closed-loop tracking, timing benchmark, quaternion
// metric curves, config validation and world inspection.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quadmppi/quadmppi.hpp"

namespace fs = std::filesystem;
using namespace quadmppi;

namespace {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kBadConfig = 2,
  kDiverged = 3,
  kCollided = 4,
};

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> output_dir;
  std::optional<int> loops;
  bool no_diagnostics = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_loops) {
  cmd->add_option("--seed", f.seed, "Override the sampling seed");
  cmd->add_option("--workers", f.workers, "Rollout worker threads (0 = all hardware threads)");
  cmd->add_option("--output-dir", f.output_dir, "Directory for CSV and JSON outputs");
  if (with_loops) {
    cmd->add_option("--loops", f.loops, "Override the number of trajectory loops")->check(CLI::PositiveNumber);
    cmd->add_flag("--no-diagnostics", f.no_diagnostics, "Skip the per-tick controller diagnostics CSV");
  }
}

void apply_overrides(ExperimentConfig& cfg, const CommonFlags& f) {
  if (f.seed) cfg.setup.mppi.seed = *f.seed;
  if (f.workers) cfg.setup.mppi.workers = *f.workers;
  if (f.output_dir) cfg.setup.run.output_dir = *f.output_dir;
  if (f.loops) cfg.setup.run.loops = *f.loops;
  if (f.no_diagnostics) cfg.setup.run.diagnostics = false;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

int cmd_track(const std::string& config_path, const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment(config_path);
  apply_overrides(cfg, flags);
  const fs::path dir = cfg.setup.run.output_dir;
  fs::create_directories(dir);

  std::ofstream states = open_output(dir / "states.csv");
  std::optional<std::ofstream> diag;
  if (cfg.setup.run.diagnostics) diag.emplace(open_output(dir / "diag.csv"));
  const TrackingReport report = run_closed_loop(cfg.setup, {&states, diag ? &*diag : nullptr});

  nlohmann::json summary = report_to_json(report);
  summary["config"] = config_path;
  summary["seed"] = cfg.setup.mppi.seed;
  summary["loops"] = cfg.setup.run.loops;
  summary["outputs"] = {{"states", (dir / "states.csv").string()},
                        {"diagnostics", diag ? nlohmann::json((dir / "diag.csv").string()) : nlohmann::json()},
                        {"report", (dir / "report.json").string()}};
  write_json(dir / "report.json", summary);
  std::cout << summary.dump() << '\n';

  if (report.diverged) {
    std::cerr << "track: diverged after " << report.ticks << " ticks (error bound "
              << cfg.setup.run.divergence_bound << " m)\n";
    return kDiverged;
  }
  if (report.collisions > 0) {
    std::cerr << "track: " << report.collisions << " plant steps in collision\n";
    return kCollided;
  }
  return kOk;
}

int cmd_bench(const std::string& config_path, const CommonFlags& flags, std::optional<int> iterations) {
  ExperimentConfig cfg = load_experiment(config_path);
  apply_overrides(cfg, flags);
  if (iterations) cfg.bench.iterations = *iterations;
  const fs::path dir = cfg.setup.run.output_dir;
  fs::create_directories(dir);

  const CollisionWorld* world = cfg.setup.world ? &*cfg.setup.world : nullptr;
  const BenchSummary summary =
      timing_benchmark(cfg.setup.drone, cfg.setup.mppi, cfg.setup.weights, cfg.setup.trajectory, world, cfg.bench,
                       [](const BenchRow& r) {
                         std::fprintf(stderr, "bench K=%d N=%d mean=%.3f ms\n", r.rollouts, r.horizon,
                                      r.mean_us * 1e-3);
                       });
  std::ofstream csv = open_output(dir / "bench.csv");
  write_bench_csv(csv, summary.rows);
  nlohmann::json j = bench_to_json(summary);
  j["config"] = config_path;
  j["outputs"] = {{"table", (dir / "bench.csv").string()}, {"summary", (dir / "bench.json").string()}};
  write_json(dir / "bench.json", j);
  std::cout << j.dump() << '\n';
  return kOk;
}

int cmd_quatdist(int steps, std::vector<double> axis, const std::optional<std::string>& output_dir) {
  if (steps < 1) throw std::invalid_argument("--steps must be >= 1");
  const Vec3 n(axis[0], axis[1], axis[2]);
  if (!(n.norm() > 0.0)) throw std::invalid_argument("--axis must be non-zero");

  std::ostream* out = &std::cout;
  std::ofstream file;
  fs::path path;
  if (output_dir) {
    fs::create_directories(*output_dir);
    path = fs::path(*output_dir) / "quatdist.csv";
    file = open_output(path);
    out = &file;
  }
  *out << "angle_deg,euclidean,exact,approx\n";
  const Quat origin = quat_identity();
  char buf[128];
  nlohmann::json anchors = nlohmann::json::object();
  for (int i = 0; i <= steps; ++i) {
    const double deg = 360.0 * i / steps;
    const Quat q = quat_from_axis_angle(n, deg * std::numbers::pi / 180.0);
    const double e = quat_dist_euclidean(origin, q);
    const double a = quat_angle(origin, q);
    const double d = quat_dist_approx(origin, q);
    std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g,%.17g\n", deg, e, a, d);
    *out << buf;
    if (2 * i == steps || i == steps) {
      anchors[std::to_string(static_cast<int>(std::lround(deg)))] = {{"euclidean", e}, {"exact", a}, {"approx", d}};
    }
  }
  if (output_dir) {
    const nlohmann::json summary{{"schema", "quadmppi.quatdist/1"},
                                 {"steps", steps},
                                 {"anchors", anchors},
                                 {"outputs", {{"table", path.string()}}}};
    write_json(fs::path(*output_dir) / "quatdist.json", summary);
    std::cout << summary.dump() << '\n';
  }
  return kOk;
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig cfg = load_experiment(config_path);
  const auto period = trajectory_period(cfg.setup.trajectory);
  nlohmann::json j{{"schema", "quadmppi.validate/1"},
                   {"config", config_path},
                   {"valid", true},
                   {"trajectory", trajectory_name(cfg.setup.trajectory)},
                   {"period_s", period ? nlohmann::json(*period) : nlohmann::json()},
                   {"controller_dt_s", cfg.setup.mppi.controller_dt()},
                   {"ticks", closed_loop_ticks(cfg.setup)},
                   {"K", cfg.setup.mppi.rollouts},
                   {"N", cfg.setup.mppi.horizon},
                   {"world", cfg.world_path.empty() ? nlohmann::json() : nlohmann::json(cfg.world_path)},
                   {"obstacles", cfg.setup.world ? cfg.setup.world->obstacles().size() : 0}};
  std::cout << j.dump() << '\n';
  return kOk;
}

int cmd_world_check(const std::string& world_path, const std::optional<std::string>& config_path,
                    const std::optional<std::string>& output_dir) {
  const CollisionWorld world = load_world(world_path);
  std::size_t cylinders = 0, boxes = 0, walls = 0, windows = 0;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Obstacle& o : world.obstacles()) {
    std::visit(
        [&](const auto& ob) {
          using T = std::decay_t<decltype(ob)>;
          Box b;
          if constexpr (std::is_same_v<T, VerticalCylinder>) {
            ++cylinders;
            b = Box{Vec3(ob.center.x() - ob.radius, ob.center.y() - ob.radius, ob.z_min),
                    Vec3(ob.center.x() + ob.radius, ob.center.y() + ob.radius, ob.z_max)};
          } else if constexpr (std::is_same_v<T, Box>) {
            ++boxes;
            b = ob;
          } else {
            ++walls;
            windows += ob.windows.size();
            b = ob.wall;
          }
          lo = lo.cwiseMin(b.min_corner);
          hi = hi.cwiseMax(b.max_corner);
        },
        o);
  }
  nlohmann::json j{{"schema", "quadmppi.world_check/1"},
                   {"world", world_path},
                   {"drone_radius", world.drone_radius()},
                   {"obstacles", world.obstacles().size()},
                   {"cylinders", cylinders},
                   {"boxes", boxes},
                   {"walls", walls},
                   {"windows", windows}};
  if (!world.empty()) j["bounds"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};

  // Optionally count how much of one reference loop runs through obstacles.
  if (config_path) {
    const ExperimentConfig cfg = load_experiment(*config_path);
    const double period = trajectory_period(cfg.setup.trajectory).value_or(cfg.setup.run.duration.value_or(1.0));
    const int samples = 2000;
    int blocked = 0;
    std::ofstream csv;
    if (output_dir) {
      fs::create_directories(*output_dir);
      csv = open_output(fs::path(*output_dir) / "world_check.csv");
      csv << "t,x,y,z,colliding\n";
    }
    for (int i = 0; i < samples; ++i) {
      const double t = period * i / samples;
      const Vec3 p = generate_reference(cfg.setup.trajectory, t).p();
      const bool hit = world.is_colliding(p);
      blocked += hit ? 1 : 0;
      if (csv.is_open()) csv << t << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << (hit ? 1 : 0) << '\n';
    }
    j["reference"] = {{"config", *config_path},
                      {"samples", samples},
                      {"colliding_samples", blocked},
                      {"colliding_fraction", static_cast<double>(blocked) / samples}};
  }
  std::cout << j.dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based quadrotor flight controller: simulation and benchmark tools"};
  app.require_subcommand(1);

  CommonFlags track_flags;
  std::string track_config;
  CLI::App* track = app.add_subcommand("track", "Run a closed-loop tracking experiment");
  track->add_option("config", track_config, "Experiment config")->required();
  add_common_flags(track, track_flags, true);

  CommonFlags bench_flags;
  std::string bench_config;
  std::optional<int> bench_iterations;
  CLI::App* bench = app.add_subcommand("bench", "Time controller iterations over a K x N grid");
  bench->add_option("config", bench_config, "Experiment config with a [bench] section")->required();
  bench->add_option("--iterations", bench_iterations, "Timed iterations per cell")->check(CLI::PositiveNumber);
  add_common_flags(bench, bench_flags, false);

  int qd_steps = 360;
  std::vector<double> qd_axis{0.0, 0.0, 1.0};
  std::optional<std::string> qd_output;
  CLI::App* quatdist = app.add_subcommand("quatdist", "Emit orientation distance curves over a full rotation");
  quatdist->add_option("--steps", qd_steps, "Samples between 0 and 360 degrees");
  quatdist->add_option("--axis", qd_axis, "Rotation axis")->expected(3);
  quatdist->add_option("--output-dir", qd_output, "Write quatdist.csv and quatdist.json here instead of stdout");

  std::string validate_config;
  CLI::App* validate = app.add_subcommand("validate", "Check an experiment config");
  validate->add_option("config", validate_config, "Experiment config")->required();

  std::string world_file;
  std::optional<std::string> world_config, world_output;
  CLI::App* world_check = app.add_subcommand("world-check", "Load a world file and report obstacle statistics");
  world_check->add_option("world", world_file, "World JSON file")->required();
  world_check->add_option("--config", world_config, "Also check this experiment's reference path");
  world_check->add_option("--output-dir", world_output, "Write the sampled reference path as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (*track) return cmd_track(track_config, track_flags);
    if (*bench) return cmd_bench(bench_config, bench_flags, bench_iterations);
    if (*quatdist) return cmd_quatdist(qd_steps, qd_axis, qd_output);
    if (*validate) return cmd_validate(validate_config);
    if (*world_check) return cmd_world_check(world_file, world_config, world_output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const WorldFileError& e) {
    std::cerr << "world error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}
