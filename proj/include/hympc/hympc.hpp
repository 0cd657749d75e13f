#pragma once

// Umbrella header for the library part (no CLI).

#include "hympc/types.hpp"
#include "hympc/model.hpp"
#include "hympc/expm.hpp"
#include "hympc/quadrature.hpp"
#include "hympc/execution.hpp"
#include "hympc/hmp_solver.hpp"
#include "hympc/sim.hpp"
#include "hympc/mpc.hpp"
#include "hympc/io.hpp"
