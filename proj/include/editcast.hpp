#pragma once

// Umbrella header.

#include "editcast/editlog.hpp"
#include "editcast/ensemble.hpp"
#include "editcast/error.hpp"
#include "editcast/features.hpp"
#include "editcast/forest.hpp"
#include "editcast/io.hpp"
#include "editcast/metrics.hpp"
#include "editcast/model.hpp"
#include "editcast/optim.hpp"
#include "editcast/parallel.hpp"
#include "editcast/pipeline.hpp"
#include "editcast/random.hpp"
#include "editcast/report.hpp"
#include "editcast/segments.hpp"
#include "editcast/synthgen.hpp"
