#include <gtest/gtest.h>

#include "support/generators.hpp"

using namespace quadmppi;

namespace {

std::string config_path(const std::string& name) { return std::string(QUADMPPI_SOURCE_DIR) + "/configs/" + name; }

struct Peaks {
  double speed = 0.0;
  double accel = 0.0;
};

// Dense sampling of the analytic derivatives over one period.
Peaks measure_peaks(const TrajectorySpec& spec) {
  const double period = *trajectory_period(spec);
  Peaks out;
  const int n = 200000;
  for (int i = 0; i <= n; ++i) {
    const PathSample s = sample_path(spec, period * i / n);
    out.speed = std::max(out.speed, s.velocity.norm());
    out.accel = std::max(out.accel, s.acceleration.norm());
  }
  return out;
}

}  // namespace

TEST(Trajectory, ShippedConfigsHitTablePeaks) {
  struct Case {
    const char* config;
    double speed;
    double accel;
  };
  // Targets: line 12.271 / 19.782, circle 8.459 / 7.034,
  // slanted circle 5.652 / 5.289, eight 8.853 / 7.571.
  for (const Case& c : {Case{"line.cfg", 12.271, 19.782}, Case{"circle.cfg", 8.459, 7.034},
                        Case{"slanted_circle.cfg", 5.652, 5.289}, Case{"eight.cfg", 8.853, 7.571}}) {
    const TrajectorySpec spec = load_experiment(config_path(c.config)).setup.trajectory;
    const Peaks p = measure_peaks(spec);
    EXPECT_NEAR(p.speed / c.speed, 1.0, 0.05) << c.config << " speed " << p.speed;
    EXPECT_NEAR(p.accel / c.accel, 1.0, 0.05) << c.config << " accel " << p.accel;
  }
}

TEST(Trajectory, PeriodicInEveryShape) {
  gen::Gen g(81);
  const std::vector<TrajectorySpec> specs{LineSpec{}, CircleSpec{}, SlantedCircleSpec{}, EightSpec{}};
  for (const TrajectorySpec& spec : specs) {
    const double period = *trajectory_period(spec);
    for (int i = 0; i < 50; ++i) {
      const double t = g.uniform(0.0, 3.0 * period);
      const State a = generate_reference(spec, t);
      const State b = generate_reference(spec, t + period);
      EXPECT_LT((a.p() - b.p()).norm(), 1e-9) << trajectory_name(spec);
      EXPECT_LT((a.v() - b.v()).norm(), 1e-9) << trajectory_name(spec);
      EXPECT_LT(quat_dist_approx(a.q(), b.q()), 1e-12) << trajectory_name(spec);
    }
  }
}

TEST(Trajectory, CircleSpeedIsConstant) {
  gen::Gen g(82);
  const CircleSpec c{Vec3(1.0, -2.0, 3.0), 7.0, 6.5};
  const double expected = 2.0 * std::numbers::pi * c.radius / c.period;
  for (int i = 0; i < 200; ++i) {
    const State s = generate_reference(c, g.uniform(0.0, 40.0));
    EXPECT_NEAR(s.v().norm(), expected, 1e-12);
    EXPECT_NEAR((s.p() - c.center).norm(), c.radius, 1e-12);
  }
}

TEST(Trajectory, DerivativesMatchFiniteDifferences) {
  gen::Gen g(83);
  const std::vector<TrajectorySpec> specs{LineSpec{}, CircleSpec{}, SlantedCircleSpec{}, EightSpec{}};
  const double h = 1e-5;
  for (const TrajectorySpec& spec : specs) {
    for (int i = 0; i < 100; ++i) {
      const double t = g.uniform(h, 30.0);
      const PathSample s = sample_path(spec, t);
      const PathSample lo = sample_path(spec, t - h), hi = sample_path(spec, t + h);
      EXPECT_LT((s.velocity - (hi.position - lo.position) / (2 * h)).norm(), 1e-5) << trajectory_name(spec);
      EXPECT_LT((s.acceleration - (hi.velocity - lo.velocity) / (2 * h)).norm(), 1e-4) << trajectory_name(spec);
    }
  }
}

TEST(Trajectory, SlantedCircleLiesInTiltedPlane) {
  SlantedCircleSpec s;
  s.circle = CircleSpec{Vec3(0.0, 0.0, 4.0), 6.0, 7.0};
  s.tilt = std::numbers::pi / 6.0;
  const Vec3 normal(0.0, -std::sin(s.tilt), std::cos(s.tilt));
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = sample_path(s, 0.07 * i).position - s.circle.center;
    EXPECT_NEAR(p.dot(normal), 0.0, 1e-12);
    EXPECT_NEAR(p.norm(), 6.0, 1e-12);
  }
}

TEST(Trajectory, EightFollowsGeronoLemniscate) {
  const EightSpec e{Vec3(0.0, 0.0, 3.0), 9.0, 11.0};
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = sample_path(e, 0.11 * i).position - e.center;
    // x^4 = a^2 (x^2 - y^2) on x = a sin(phi), y = a sin(2 phi) / 2.
    const double a = e.half_width;
    EXPECT_NEAR(std::pow(p.x(), 4), a * a * (p.x() * p.x() - p.y() * p.y()), 1e-12 * std::pow(a, 4));
    EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(Trajectory, PeakHelpersInvertTheirFormulas) {
  const CircleSpec c = circle_from_peaks(Vec3::Zero(), 8.459, 7.034);
  const double omega = 2.0 * std::numbers::pi / c.period;
  EXPECT_NEAR(c.radius * omega, 8.459, 1e-12);
  EXPECT_NEAR(c.radius * omega * omega, 7.034, 1e-12);

  const Peaks p = measure_peaks(eight_from_peaks(Vec3::Zero(), 8.853, 7.571));
  EXPECT_NEAR(p.speed, 8.853, 1e-6);
  EXPECT_NEAR(p.accel, 7.571, 1e-4);
}

TEST(Trajectory, LineTurnaroundIsSmoothAndBounded) {
  const LineSpec line;
  const Peaks p = measure_peaks(line);
  EXPECT_NEAR(p.speed, line.peak_speed, 1e-9);
  EXPECT_NEAR(p.accel, line.peak_accel, 1e-6);
  // Starts at rest at the start point and reaches the end at rest.
  EXPECT_LT((sample_path(line, 0.0).position - line.start).norm(), 1e-12);
  EXPECT_LT(sample_path(line, 0.0).velocity.norm(), 1e-12);
  const double half = 0.5 * *trajectory_period(line);
  EXPECT_LT((sample_path(line, half).position - line.end).norm(), 1e-9);
  EXPECT_LT(sample_path(line, half).velocity.norm(), 1e-9);
}

TEST(Trajectory, ReferenceAttitudeIsLevelWithPathHeading) {
  const CircleSpec c{Vec3::Zero(), 5.0, 10.0};
  for (int i = 0; i < 50; ++i) {
    const State s = generate_reference(c, 0.2 * i);
    const Vec3 body_x = quat_to_rotation_matrix(s.q()) * Vec3::UnitX();
    EXPECT_NEAR(body_x.z(), 0.0, 1e-12);
    EXPECT_NEAR(body_x.dot(s.v().normalized()), 1.0, 1e-12);
    EXPECT_EQ(s.w(), Vec3::Zero());
  }
  const State eight = generate_reference(EightSpec{}, 2.3);
  EXPECT_LT(quat_dist_approx(eight.q(), quat_identity()), 1e-15);
}

TEST(Window, ShiftsByOneAfterOnePredictionStep) {
  const TrajectorySpec spec = EightSpec{};
  const ReferenceWindow a = reference_window(spec, 1.3, 15, 0.1);
  const ReferenceWindow b = reference_window(spec, 1.4, 15, 0.1);
  ASSERT_EQ(a.size(), 16u);
  for (std::size_t j = 0; j + 1 < a.size(); ++j) {
    EXPECT_LT((a[j + 1].data - b[j].data).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Window, EntriesLieOnAnalyticCurve) {
  const CircleSpec c{Vec3(2.0, 1.0, 3.0), 4.0, 5.0};
  const ReferenceWindow w = reference_window(c, 0.37, 15, 0.1);
  for (int j = 0; j <= 15; ++j) {
    const double phi = 2.0 * std::numbers::pi / 5.0 * (0.37 + 0.1 * j);
    const Vec3 expect = c.center + 4.0 * Vec3(std::cos(phi), std::sin(phi), 0.0);
    EXPECT_LT((w[j].p() - expect).norm(), 1e-12);
  }
}

TEST(Window, HoverWindowIsConstant) {
  const ReferenceWindow w = reference_window(HoverSpec{Vec3(1, 2, 3), 0.4}, 5.0, 15, 0.1);
  for (const State& s : w) EXPECT_EQ(s.data, w[0].data);
  EXPECT_FALSE(trajectory_period(HoverSpec{}));
}

TEST(Trajectory, InvalidSpecsAreRejected) {
  EXPECT_THROW(validate_trajectory(CircleSpec{Vec3::Zero(), -1.0, 5.0}), std::invalid_argument);
  EXPECT_THROW(validate_trajectory(EightSpec{Vec3::Zero(), 5.0, 0.0}), std::invalid_argument);
  LineSpec short_line;
  short_line.end = short_line.start + Vec3(1.0, 0.0, 0.0);
  EXPECT_THROW(validate_trajectory(short_line), std::invalid_argument);
  EXPECT_THROW(generate_reference(CircleSpec{}, -1.0), std::invalid_argument);
}
