#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadmppi/collision.hpp"
#include "quadmppi/cost.hpp"
#include "quadmppi/dynamics.hpp"
#include "quadmppi/mppi.hpp"
#include "quadmppi/simulation.hpp"
#include "quadmppi/trajectory.hpp"

namespace quadmppi {

/// Error tied to a location in a config file. `line` is 0 when the problem
/// is not attached to a specific line (e.g. a missing section).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& file, int line, const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// ---------------------------------------------------------------------------
// INI-style document: [section] headers, `key = value` lines, '#' comments.
// Values are numbers, bare or quoted strings, true/false, or [a, b, ...] lists.
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string raw;
  int line = 0;
  mutable bool used = false;
};

struct ConfigSection {
  int line = 0;
  std::map<std::string, ConfigEntry> entries;
};

class ConfigDocument {
 public:
  static ConfigDocument parse(std::istream& in, const std::string& name) {
    ConfigDocument doc;
    doc.name_ = name;
    std::string text;
    int line_no = 0;
    ConfigSection* current = nullptr;
    while (std::getline(in, text)) {
      ++line_no;
      const std::string line = trim(strip_comment(text));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(name, line_no, "malformed section header '" + line + "'");
        const std::string section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) throw ConfigError(name, line_no, "empty section name");
        if (doc.sections_.count(section)) throw ConfigError(name, line_no, "duplicate section [" + section + "]");
        current = &doc.sections_[section];
        current->line = line_no;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(name, line_no, "expected 'key = value'");
      if (!current) throw ConfigError(name, line_no, "key outside of any [section]");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(name, line_no, "missing key before '='");
      if (value.empty()) throw ConfigError(name, line_no, "missing value for '" + key + "'");
      if (current->entries.count(key)) throw ConfigError(name, line_no, "duplicate key '" + key + "'");
      current->entries[key] = ConfigEntry{value, line_no};
    }
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    return parse(in, path);
  }

  const std::string& name() const { return name_; }
  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  const ConfigSection* section(const std::string& s) const {
    const auto it = sections_.find(s);
    return it == sections_.end() ? nullptr : &it->second;
  }
  const std::map<std::string, ConfigSection>& sections() const { return sections_; }

  const ConfigEntry* find(const std::string& section, const std::string& key) const {
    const ConfigSection* s = this->section(section);
    if (!s) return nullptr;
    const auto it = s->entries.find(key);
    if (it == s->entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  [[noreturn]] void fail(const ConfigEntry& e, const std::string& msg) const {
    throw ConfigError(name_, e.line, msg);
  }

  double number(const std::string& section, const std::string& key, double fallback) const {
    const ConfigEntry* e = find(section, key);
    return e ? parse_number(*e, key) : fallback;
  }

  std::optional<double> optional_number(const std::string& section, const std::string& key) const {
    const ConfigEntry* e = find(section, key);
    return e ? std::optional<double>(parse_number(*e, key)) : std::nullopt;
  }

  int integer(const std::string& section, const std::string& key, int fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    const double v = parse_number(*e, key);
    if (v != std::floor(v) || std::abs(v) > 2e9) fail(*e, "'" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    const std::string v = unquote(e->raw);
    if (v == "true") return true;
    if (v == "false") return false;
    fail(*e, "'" + key + "' must be true or false");
  }

  std::optional<std::string> string(const std::string& section, const std::string& key) const {
    const ConfigEntry* e = find(section, key);
    return e ? std::optional<std::string>(unquote(e->raw)) : std::nullopt;
  }

  std::vector<double> list(const std::string& section, const std::string& key, std::size_t expected = 0) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return {};
    return parse_list(*e, key, expected);
  }

  template <int Size>
  Eigen::Matrix<double, Size, 1> vector(const std::string& section, const std::string& key,
                                        const Eigen::Matrix<double, Size, 1>& fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    const auto v = parse_list(*e, key, Size);
    Eigen::Matrix<double, Size, 1> out;
    for (int i = 0; i < Size; ++i) out(i) = v[static_cast<std::size_t>(i)];
    return out;
  }

  /// Reports the first key that no getter asked for.
  void reject_unknown_keys() const {
    for (const auto& [sname, s] : sections_) {
      for (const auto& [key, e] : s.entries) {
        if (!e.used) throw ConfigError(name_, e.line, "unknown key '" + key + "' in [" + sname + "]");
      }
    }
  }

  void reject_unknown_sections(const std::set<std::string>& allowed) const {
    for (const auto& [sname, s] : sections_) {
      if (!allowed.count(sname)) throw ConfigError(name_, s.line, "unknown section [" + sname + "]");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
  }

  double parse_number(const ConfigEntry& e, const std::string& key) const {
    return to_number(e, key, trim(e.raw));
  }

  double to_number(const ConfigEntry& e, const std::string& key, const std::string& text) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      fail(e, "'" + key + "' expects a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) fail(e, "'" + key + "' expects a number, got '" + text + "'");
    return v;
  }

  std::vector<double> parse_list(const ConfigEntry& e, const std::string& key, std::size_t expected) const {
    const std::string s = trim(e.raw);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
      fail(e, "'" + key + "' expects a list like [a, b, c]");
    }
    std::vector<double> out;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) fail(e, "'" + key + "' has an empty list element");
      out.push_back(to_number(e, key, t));
    }
    if (expected && out.size() != expected) {
      fail(e, "'" + key + "' expects " + std::to_string(expected) + " values, got " + std::to_string(out.size()));
    }
    return out;
  }

  std::string name_;
  std::map<std::string, ConfigSection> sections_;
};

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::vector<int> rollouts{128, 256, 512, 896, 1280, 1792};
  std::vector<int> horizons{5, 10, 15, 20, 25, 30};
  int iterations = 200;
  int warmup_iterations = 10;
  double budget_ms = 10.0;
  double hard_budget_ms = 20.0;
};

struct ExperimentConfig {
  ClosedLoopSetup setup;
  BenchConfig bench;
  std::string path;
  std::string world_path;
};

namespace detail {

inline const ConfigEntry& require(const ConfigDocument& doc, const std::string& section, const std::string& key) {
  const ConfigEntry* e = doc.find(section, key);
  if (!e) {
    const ConfigSection* s = doc.section(section);
    throw ConfigError(doc.name(), s ? s->line : 0, "missing required key '" + key + "' in [" + section + "]");
  }
  return *e;
}

/// Runs a validator and re-throws its complaint at the given line.
template <typename Fn>
void validate_at(const ConfigDocument& doc, int line, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(doc.name(), line, e.what());
  }
}

inline int section_line(const ConfigDocument& doc, const std::string& s) {
  const ConfigSection* sec = doc.section(s);
  return sec ? sec->line : 0;
}

inline DroneParams load_drone(const ConfigDocument& doc) {
  DroneParams d;
  const std::string s = "drone";
  d.mass = doc.number(s, "m", d.mass);
  d.arm_length = doc.number(s, "l", d.arm_length);
  d.torque_constant = doc.number(s, "c_tf", d.torque_constant);
  const ConfigEntry* j_si = doc.find(s, "J");
  const ConfigEntry* j_gm2 = doc.find(s, "J_gm2");
  if (j_si && j_gm2) doc.fail(*j_gm2, "give inertia as either J (kg m^2) or J_gm2 (g m^2), not both");
  if (j_si) d.inertia = doc.vector<3>(s, "J", d.inertia);
  if (j_gm2) d.inertia = 1e-3 * doc.vector<3>(s, "J_gm2", d.inertia);
  d.gravity = doc.vector<3>(s, "g", d.gravity);
  d.thrust_min = doc.number(s, "T_min", d.thrust_min);
  d.thrust_max = doc.number(s, "T_max", d.thrust_max);
  d.rate_xy_max = doc.number(s, "w_xy_max", d.rate_xy_max);
  d.rate_z_max = doc.number(s, "w_z_max", d.rate_z_max);
  validate_at(doc, section_line(doc, s), [&] {
    d.validate();
    ActuatorModel check(d);
  });
  return d;
}

inline MppiConfig load_mppi(const ConfigDocument& doc) {
  MppiConfig m;
  const std::string s = "mppi";
  m.rollouts = doc.integer(s, "K", m.rollouts);
  m.horizon = doc.integer(s, "N", m.horizon);
  m.dt = doc.number(s, "dt", m.dt);
  m.interpolation_steps = doc.integer(s, "n_interp", m.interpolation_steps);
  m.lambda = doc.number(s, "lambda", m.lambda);
  m.sigma = doc.vector<4>(s, "Sigma", m.sigma);
  if (doc.find(s, "u_init")) m.u_init = BodyCommand::from_vector(doc.vector<4>(s, "u_init", Vec4::Zero()));
  const double seed = doc.number(s, "seed", 0.0);
  if (seed < 0.0 || seed != std::floor(seed)) doc.fail(*doc.find(s, "seed"), "'seed' must be a non-negative integer");
  m.seed = static_cast<std::uint64_t>(seed);
  const int workers = doc.integer(s, "workers", 0);
  if (workers < 0) doc.fail(*doc.find(s, "workers"), "'workers' must be >= 0");
  m.workers = static_cast<unsigned>(workers);
  m.record_states = doc.boolean(s, "record_states", false);
  if (const ConfigEntry* e = doc.find(s, "shift")) {
    const auto v = doc.string(s, "shift");
    if (*v == "phase") {
      m.shift = ShiftMode::Phase;
    } else if (*v == "resample") {
      m.shift = ShiftMode::Resample;
    } else {
      doc.fail(*e, "'shift' must be 'phase' or 'resample'");
    }
  }
  validate_at(doc, section_line(doc, s), [&] { m.validate(); });
  return m;
}

inline CostWeights load_weights(const ConfigDocument& doc) {
  CostWeights w;
  const std::string s = "weights";
  w.input = doc.vector<4>(s, "R", w.input);
  w.input_change = doc.vector<4>(s, "R_delta", w.input_change);
  w.position = doc.number(s, "c_p", w.position);
  w.velocity = doc.number(s, "c_v", w.velocity);
  w.attitude = doc.number(s, "c_q", w.attitude);
  w.rates = doc.number(s, "c_w", w.rates);
  w.obstacle = doc.number(s, "c_obs", w.obstacle);
  if (const ConfigEntry* e = doc.find(s, "quat_metric")) {
    const auto v = doc.string(s, "quat_metric");
    if (*v == "approx") {
      w.metric = QuatMetric::Approx;
    } else if (*v == "angle") {
      w.metric = QuatMetric::Angle;
    } else {
      doc.fail(*e, "'quat_metric' must be 'approx' or 'angle'");
    }
  }
  validate_at(doc, section_line(doc, s), [&] { w.validate(); });
  return w;
}

inline TrajectorySpec load_trajectory(const ConfigDocument& doc) {
  const std::string s = "trajectory";
  if (!doc.has_section(s)) throw ConfigError(doc.name(), 0, "missing required section [trajectory]");
  const ConfigEntry& type_entry = require(doc, s, "type");
  const std::string type = *doc.string(s, "type");
  const Vec3 origin(0.0, 0.0, 3.0);

  // Circles and eights take either explicit geometry or target peaks.
  auto peaks = [&]() -> std::optional<std::pair<double, double>> {
    const auto v = doc.optional_number(s, "peak_speed");
    const auto a = doc.optional_number(s, "peak_accel");
    if (v.has_value() != a.has_value()) doc.fail(type_entry, "give both peak_speed and peak_accel");
    if (!v) return std::nullopt;
    if (!(*v > 0.0) || !(*a > 0.0)) doc.fail(type_entry, "peak_speed and peak_accel must be positive");
    return std::make_pair(*v, *a);
  };

  TrajectorySpec spec;
  if (type == "hover") {
    HoverSpec h;
    h.position = doc.vector<3>(s, "position", h.position);
    h.yaw = doc.number(s, "yaw", h.yaw);
    spec = h;
  } else if (type == "line") {
    LineSpec l;
    l.start = doc.vector<3>(s, "start", l.start);
    l.end = doc.vector<3>(s, "end", l.end);
    l.peak_speed = doc.number(s, "peak_speed", l.peak_speed);
    l.peak_accel = doc.number(s, "peak_accel", l.peak_accel);
    spec = l;
  } else if (type == "circle" || type == "slanted_circle") {
    const Vec3 center = doc.vector<3>(s, "center", origin);
    CircleSpec c;
    if (const auto pk = peaks()) {
      c = circle_from_peaks(center, pk->first, pk->second);
    } else {
      c.center = center;
      c.radius = doc.number(s, "radius", c.radius);
      c.period = doc.number(s, "period", c.period);
    }
    if (type == "circle") {
      spec = c;
    } else {
      const double tilt_deg = doc.number(s, "tilt_deg", 30.0);
      spec = SlantedCircleSpec{c, tilt_deg * std::numbers::pi / 180.0};
    }
  } else if (type == "eight") {
    const Vec3 center = doc.vector<3>(s, "center", origin);
    EightSpec e;
    if (const auto pk = peaks()) {
      e = eight_from_peaks(center, pk->first, pk->second);
    } else {
      e.center = center;
      e.half_width = doc.number(s, "half_width", e.half_width);
      e.period = doc.number(s, "period", e.period);
    }
    spec = e;
  } else {
    doc.fail(type_entry, "unknown trajectory type '" + type + "' (hover, line, circle, slanted_circle, eight)");
  }
  validate_at(doc, type_entry.line, [&] { validate_trajectory(spec); });
  return spec;
}

inline RunConfig load_run(const ConfigDocument& doc) {
  RunConfig r;
  const std::string s = "run";
  r.loops = doc.integer(s, "loops", r.loops);
  r.plant_dt = doc.number(s, "plant_dt", r.plant_dt);
  r.rate_time_constant = doc.number(s, "rate_time_constant", r.rate_time_constant);
  r.divergence_bound = doc.number(s, "divergence_bound", r.divergence_bound);
  r.planning_margin = doc.number("world", "planning_margin", r.planning_margin);
  r.warmup = doc.optional_number(s, "warmup");
  r.duration = doc.optional_number(s, "duration");
  if (const auto dir = doc.string(s, "output_dir")) r.output_dir = *dir;
  r.diagnostics = doc.boolean(s, "diagnostics", r.diagnostics);
  validate_at(doc, section_line(doc, s), [&] { r.validate(); });
  return r;
}

inline std::vector<int> int_list(const ConfigDocument& doc, const std::string& s, const std::string& key,
                                 const std::vector<int>& fallback) {
  const ConfigEntry* e = doc.find(s, key);
  if (!e) return fallback;
  std::vector<int> out;
  for (double v : doc.list(s, key)) {
    if (v != std::floor(v) || v < 1.0) doc.fail(*e, "'" + key + "' entries must be positive integers");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) doc.fail(*e, "'" + key + "' must not be empty");
  return out;
}

inline BenchConfig load_bench(const ConfigDocument& doc) {
  BenchConfig b;
  const std::string s = "bench";
  b.rollouts = int_list(doc, s, "K_grid", b.rollouts);
  b.horizons = int_list(doc, s, "N_grid", b.horizons);
  b.iterations = doc.integer(s, "iterations", b.iterations);
  b.warmup_iterations = doc.integer(s, "warmup_iterations", b.warmup_iterations);
  b.budget_ms = doc.number(s, "budget_ms", b.budget_ms);
  b.hard_budget_ms = doc.number(s, "hard_budget_ms", b.hard_budget_ms);
  if (b.iterations < 1 || b.warmup_iterations < 0) {
    throw ConfigError(doc.name(), section_line(doc, s), "bench iterations must be >= 1 and warmup >= 0");
  }
  return b;
}

}  // namespace detail

/// Parses and validates a full experiment config. World file paths are
/// resolved relative to the config file's directory.
inline ExperimentConfig load_experiment(const ConfigDocument& doc, const std::filesystem::path& base_dir = {}) {
  doc.reject_unknown_sections({"drone", "mppi", "weights", "trajectory", "world", "run", "bench"});
  ExperimentConfig cfg;
  cfg.path = doc.name();
  cfg.setup.drone = detail::load_drone(doc);
  cfg.setup.mppi = detail::load_mppi(doc);
  cfg.setup.weights = detail::load_weights(doc);
  cfg.setup.trajectory = detail::load_trajectory(doc);
  cfg.setup.run = detail::load_run(doc);
  cfg.bench = detail::load_bench(doc);

  if (doc.has_section("world")) {
    const ConfigEntry& file = detail::require(doc, "world", "file");
    const std::filesystem::path p = *doc.string("world", "file");
    cfg.world_path = (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
    try {
      cfg.setup.world = load_world(cfg.world_path);
    } catch (const WorldFileError& e) {
      doc.fail(file, e.what());
    }
    if (const auto r = doc.optional_number("world", "drone_radius")) {
      if (!(*r >= 0.0)) doc.fail(*doc.find("world", "drone_radius"), "'drone_radius' must be >= 0");
      cfg.setup.world = cfg.setup.world->with_drone_radius(*r);
    }
  }

  const double ctrl_dt = cfg.setup.mppi.controller_dt();
  if (cfg.setup.run.plant_dt > ctrl_dt * (1.0 + 1e-12)) {
    throw ConfigError(doc.name(), detail::section_line(doc, "run"), "plant_dt must not exceed dt / n_interp");
  }
  const double ratio = ctrl_dt / cfg.setup.run.plant_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ConfigError(doc.name(), detail::section_line(doc, "run"), "plant_dt must divide dt / n_interp");
  }
  if (!trajectory_period(cfg.setup.trajectory) && !cfg.setup.run.duration) {
    throw ConfigError(doc.name(), detail::section_line(doc, "run"), "hover trajectories need [run] duration");
  }
  doc.reject_unknown_keys();
  return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  const ConfigDocument doc = ConfigDocument::load(path);
  return load_experiment(doc, std::filesystem::path(path).parent_path());
}

}  // namespace quadmppi
