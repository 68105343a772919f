#pragma once

// Umbrella header for the full toolkit.

#include "disrec/attribution.hpp"
#include "disrec/dataio.hpp"
#include "disrec/dci.hpp"
#include "disrec/factors.hpp"
#include "disrec/gbt.hpp"
#include "disrec/harness/pool.hpp"
#include "disrec/harness/report.hpp"
#include "disrec/harness/run_config.hpp"
#include "disrec/harness/run_matrix.hpp"
#include "disrec/harness/search.hpp"
#include "disrec/kmeans.hpp"
#include "disrec/learners/learners.hpp"
#include "disrec/rankeval.hpp"
#include "disrec/stats.hpp"
#include "disrec/synth.hpp"
