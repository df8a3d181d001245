#pragma once

// Umbrella header.

#include "discover/automl.hpp"
#include "discover/bench.hpp"
#include "discover/config.hpp"
#include "discover/error.hpp"
#include "discover/metrics.hpp"
#include "discover/models/model.hpp"
#include "discover/parallel.hpp"
#include "discover/patterns.hpp"
#include "discover/pipeline.hpp"
#include "discover/preprocess.hpp"
#include "discover/report.hpp"
#include "discover/rng.hpp"
#include "discover/stats.hpp"
#include "discover/table.hpp"
#include "discover/task.hpp"
