#pragma once

// Umbrella header.
#include "allocation.hpp"
#include "csv.hpp"
#include "data_model.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "metrics.hpp"
#include "random.hpp"
#include "simulation.hpp"
#include "stats.hpp"
#include "tuning.hpp"
#include "uncertainty.hpp"
#include "variance.hpp"
