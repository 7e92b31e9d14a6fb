// Minimal use of the library without the config layer: hold a hover point,
// then step the setpoint by one metre and watch the error settle.

#include <cstdio>

#include "quadmppi/quadmppi.hpp"

int main() {
  using namespace quadmppi;

  ClosedLoopSetup setup;
  setup.mppi.sigma *= 0.01;  // regulation needs far less exploration than racing
  setup.mppi.seed = 7;
  setup.mppi.shift = ShiftMode::Resample;
  setup.trajectory = HoverSpec{Vec3(0.0, 0.0, 2.0), 0.0};

  const double ctrl_dt = setup.mppi.controller_dt();
  MppiController controller(setup.drone, setup.mppi, setup.weights);
  RateLoopPlant plant(setup.drone, 0.001, 0.03, State::at_rest(Vec3(0.0, 0.0, 2.0)));
  const int substeps = static_cast<int>(std::lround(ctrl_dt / 0.001));

  for (int tick = 0; tick < 600; ++tick) {
    const double t = tick * ctrl_dt;
    const HoverSpec target{Vec3(t < 1.0 ? 0.0 : 1.0, 0.0, 2.0), 0.0};
    const ReferenceWindow window = reference_window(target, 0.0, setup.mppi.horizon, setup.mppi.dt);
    const TickResult r = controller.tick(plant.state(), window);
    for (int s = 0; s < substeps; ++s) plant.step(r.command);
    if (tick % 50 == 0) {
      const double err = (plant.state().p() - target.position).norm();
      std::printf("t=%5.2f s  error=%.3f m  thrust=%.2f N  tick=%.2f ms\n", t, err, r.command.thrust,
                  r.diagnostics.wall_time_us * 1e-3);
    }
  }
  return 0;
}
