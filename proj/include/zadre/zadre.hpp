#pragma once

/// Umbrella header: pulls in the whole library.

#include "zadre/bspline.hpp"
#include "zadre/dataset.hpp"
#include "zadre/distributions.hpp"
#include "zadre/errors.hpp"
#include "zadre/experiment.hpp"
#include "zadre/forest.hpp"
#include "zadre/gamlss.hpp"
#include "zadre/metrics.hpp"
#include "zadre/mle.hpp"
#include "zadre/parallel.hpp"
#include "zadre/quantile_regression.hpp"
#include "zadre/rng.hpp"
#include "zadre/serialization.hpp"
#include "zadre/special_functions.hpp"
#include "zadre/stacking.hpp"
#include "zadre/synthetic.hpp"
#include "zadre/version.hpp"
