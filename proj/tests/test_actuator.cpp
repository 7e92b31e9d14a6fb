#include <gtest/gtest.h>

#include "support/generators.hpp"

using namespace quadmppi;

namespace {

// Allocation rebuilt from rotor geometry: thrust along body z at each arm
// tip gives torque r x F, plus a reaction yaw torque of +-c_tf per newton.
Mat4 geometric_allocation(const DroneParams& p) {
  const double a = p.arm_length / std::sqrt(2.0);
  const Vec3 pos[4] = {Vec3(a, -a, 0.0), Vec3(-a, a, 0.0), Vec3(a, a, 0.0), Vec3(-a, -a, 0.0)};
  const double spin[4] = {-1.0, -1.0, 1.0, 1.0};
  Mat4 g;
  for (int i = 0; i < 4; ++i) {
    const Vec3 torque = pos[i].cross(Vec3::UnitZ());
    g(0, i) = 1.0;
    g(1, i) = torque.x();
    g(2, i) = torque.y();
    g(3, i) = spin[i] * p.torque_constant;
  }
  return g;
}

Vec4 rotors_of(const ActuatorModel& act, const WrenchCommand& w) {
  return geometric_allocation(act.params()).inverse() * Vec4(w.thrust, w.torque.x(), w.torque.y(), w.torque.z());
}

}  // namespace

TEST(Actuator, AllocationMatchesRotorGeometry) {
  gen::Gen g(31);
  for (int i = 0; i < 50; ++i) {
    const DroneParams p = g.drone();
    EXPECT_TRUE(allocation_matrix(p).isApprox(geometric_allocation(p), 1e-14));
  }
}

TEST(Actuator, CachedInverseIsInverse) {
  const ActuatorModel act{DroneParams{}};
  EXPECT_TRUE((act.allocation() * act.allocation_inverse()).isApprox(Mat4::Identity(), 1e-13));
}

TEST(Actuator, HoverDemandSplitsEvenly) {
  const DroneParams p;
  const ActuatorModel act(p);
  const State x = State::at_rest(Vec3::Zero());
  const double hover = 1.21 * 9.81;
  const FeasibleCommand f = act.clip_and_reconstruct(x, BodyCommand{hover, Vec3::Zero()}, 0.1);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(f.rotors.thrust(i), 2.967525, 1e-9);
  EXPECT_NEAR(f.wrench.thrust, hover, 1e-9);
  EXPECT_LT(f.wrench.torque.norm(), 1e-12);
}

TEST(Actuator, SaturatedThrustCapsAtFourTimesMax) {
  const ActuatorModel act{DroneParams{}};
  const FeasibleCommand f = act.clip_and_reconstruct(State{}, BodyCommand{100.0, Vec3::Zero()}, 0.1);
  EXPECT_NEAR(f.wrench.thrust, 76.0, 1e-9);
  EXPECT_NEAR(f.body.thrust, 76.0, 1e-9);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(f.rotors.thrust(i), 19.0);
}

TEST(Actuator, ZeroThrustDemandIsLiftedToMinimum) {
  const ActuatorModel act{DroneParams{}};
  const FeasibleCommand f = act.clip_and_reconstruct(State{}, BodyCommand{0.0, Vec3::Zero()}, 0.1);
  EXPECT_NEAR(f.wrench.thrust, 4.0 * 0.3, 1e-12);
}

TEST(Actuator, DesiredTorqueFormula) {
  gen::Gen g(32);
  const DroneParams p;
  const Mat3 j = p.inertia.asDiagonal();
  for (int i = 0; i < 100; ++i) {
    const State x = g.state();
    const Vec3 wd = g.vec3(-5.0, 5.0);
    const double dt = g.uniform(0.001, 0.2);
    const Vec3 ref = j * (wd - x.w()) / dt + x.w().cross(j * x.w());
    EXPECT_LT((desired_torques(x, wd, dt, p) - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
  }
}

TEST(Actuator, FeasibleOutputRespectsRotorLimits) {
  gen::Gen g(33);
  for (int i = 0; i < 5000; ++i) {
    const DroneParams p = i % 10 == 0 ? g.drone() : DroneParams{};
    const ActuatorModel act(p);
    const FeasibleCommand f = act.clip_and_reconstruct(g.state(), g.command(p), g.uniform(0.001, 0.2));
    const Vec4 t = rotors_of(act, f.wrench);
    EXPECT_GE(t.minCoeff(), p.thrust_min - 1e-9);
    EXPECT_LE(t.maxCoeff(), p.thrust_max + 1e-9);
  }
}

TEST(Actuator, ClipIsIdempotent) {
  gen::Gen g(34);
  const DroneParams p;
  const ActuatorModel act(p);
  for (int i = 0; i < 5000; ++i) {
    const State x = g.state();
    const double dt = g.uniform(0.001, 0.2);
    const FeasibleCommand once = act.clip_and_reconstruct(x, g.command(p), dt);
    const FeasibleCommand twice = act.clip_and_reconstruct(x, once.body, dt);
    EXPECT_NEAR(twice.body.thrust, once.body.thrust, 1e-9);
    EXPECT_LT((twice.body.rates - once.body.rates).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((twice.rotors.thrust - once.rotors.thrust).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Actuator, UnsaturatedCommandRoundTrips) {
  gen::Gen g(35);
  const DroneParams p;
  const ActuatorModel act(p);
  const Mat3 j = p.inertia.asDiagonal();
  for (int i = 0; i < 5000; ++i) {
    // Build the command from interior rotor thrusts so nothing saturates.
    const State x = g.state();
    const double dt = g.uniform(0.005, 0.2);
    const Vec4 rotors = g.interior_rotors(p);
    const Vec4 wrench = geometric_allocation(p) * rotors;
    const Vec3 tau = wrench.tail<3>();
    const Vec3 wd = x.w() + j.inverse() * (tau - x.w().cross(j * x.w())) * dt;
    const FeasibleCommand f = act.clip_and_reconstruct(x, BodyCommand{wrench(0), wd}, dt);
    EXPECT_NEAR(f.body.thrust, wrench(0), 1e-9);
    EXPECT_LT((f.body.rates - wd).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((f.wrench.torque - tau).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Actuator, WrenchAndBodyCommandShareRotorThrusts) {
  gen::Gen g(36);
  const DroneParams p;
  const ActuatorModel act(p);
  const Mat3 j = p.inertia.asDiagonal();
  for (int i = 0; i < 2000; ++i) {
    const State x = g.state();
    const double dt = g.uniform(0.005, 0.2);
    const FeasibleCommand f = act.clip_and_reconstruct(x, g.command(p), dt);
    const Vec4 w = geometric_allocation(p) * f.rotors.thrust;
    EXPECT_NEAR(f.wrench.thrust, w(0), 1e-9);
    EXPECT_NEAR(f.body.thrust, w(0), 1e-9);
    EXPECT_LT((f.wrench.torque - w.tail<3>()).norm(), 1e-9);
    // The body rates are what the clipped torque reaches after dt.
    const Vec3 reached = x.w() + j.inverse() * (w.tail<3>() - x.w().cross(j * x.w())) * dt;
    EXPECT_LT((f.body.rates - reached).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Actuator, RateLimitsClampPerAxis) {
  const DroneParams p;
  const BodyCommand c = apply_rate_limits(BodyCommand{5.0, Vec3(12.0, -15.0, 3.0)}, p);
  EXPECT_EQ(c.thrust, 5.0);
  EXPECT_EQ(c.rates, Vec3(10.0, -10.0, 2.0));
  const BodyCommand inside{5.0, Vec3(1.0, -2.0, 0.5)};
  EXPECT_EQ(apply_rate_limits(inside, p), inside);
}

TEST(Actuator, SingularAllocationIsRejected) {
  DroneParams p;
  p.torque_constant = 0.0;
  EXPECT_THROW(ActuatorModel{p}, std::invalid_argument);
}

TEST(Actuator, ClipWrenchProjectsOntoLimits) {
  const ActuatorModel act{DroneParams{}};
  const WrenchCommand w = act.clip_wrench(WrenchCommand{70.0, Vec3(2.0, 0.0, 0.0)});
  const Vec4 t = rotors_of(act, w);
  EXPECT_LE(t.maxCoeff(), 19.0 + 1e-12);
  EXPECT_GE(t.minCoeff(), 0.3 - 1e-12);
}
