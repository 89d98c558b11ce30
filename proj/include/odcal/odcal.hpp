#pragma once

#include "odcal/core.hpp"
#include "odcal/dual.hpp"
#include "odcal/solvers.hpp"
#include "odcal/costs.hpp"
#include "odcal/data.hpp"
#include "odcal/calibrate.hpp"
