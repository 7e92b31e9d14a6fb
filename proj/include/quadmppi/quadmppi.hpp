#pragma once

#include "quadmppi/actuator.hpp"
#include "quadmppi/benchmark.hpp"
#include "quadmppi/collision.hpp"
#include "quadmppi/config.hpp"
#include "quadmppi/cost.hpp"
#include "quadmppi/dynamics.hpp"
#include "quadmppi/mppi.hpp"
#include "quadmppi/quaternion.hpp"
#include "quadmppi/random.hpp"
#include "quadmppi/simulation.hpp"
#include "quadmppi/trajectory.hpp"
#include "quadmppi/worker_pool.hpp"
