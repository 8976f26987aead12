#pragma once

//! Umbrella header for the uniform-in-bandwidth kernel estimation library.

#include "bandwidth_select.hpp"
#include "bias.hpp"
#include "config.hpp"
#include "deviation.hpp"
#include "empirical_process.hpp"
#include "estimators.hpp"
#include "exact_sum.hpp"
#include "experiments.hpp"
#include "kernels.hpp"
#include "models.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "sample.hpp"
#include "stats.hpp"
