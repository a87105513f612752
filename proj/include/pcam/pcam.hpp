#pragma once

// Umbrella header.

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "exemplars.hpp"
#include "experiment.hpp"
#include "gradcheck.hpp"
#include "grid.hpp"
#include "memory.hpp"
#include "pcn.hpp"
#include "random.hpp"
