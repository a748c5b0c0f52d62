#pragma once

#include "slope_amp/amp.hpp"
#include "slope_amp/baselines.hpp"
#include "slope_amp/calibration.hpp"
#include "slope_amp/errors.hpp"
#include "slope_amp/experiments.hpp"
#include "slope_amp/parallel.hpp"
#include "slope_amp/random.hpp"
#include "slope_amp/sorted_l1.hpp"
#include "slope_amp/state_evolution.hpp"
