#pragma once

#include "phasescreen/config.hpp"
#include "phasescreen/covariance.hpp"
#include "phasescreen/error.hpp"
#include "phasescreen/fft.hpp"
#include "phasescreen/grid.hpp"
#include "phasescreen/harness.hpp"
#include "phasescreen/kappa.hpp"
#include "phasescreen/medium.hpp"
#include "phasescreen/moment_pde.hpp"
#include "phasescreen/moments.hpp"
#include "phasescreen/oracles.hpp"
#include "phasescreen/propagator.hpp"
#include "phasescreen/rng.hpp"
#include "phasescreen/snapshot.hpp"

namespace phasescreen {

inline constexpr const char* version = "1.0.0";

}  // namespace phasescreen
