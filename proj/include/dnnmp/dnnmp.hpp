#pragma once

// Umbrella header for the count NNMP library.

#include "dnnmp/copula.hpp"
#include "dnnmp/diagnose.hpp"
#include "dnnmp/errors.hpp"
#include "dnnmp/geom.hpp"
#include "dnnmp/kdtree.hpp"
#include "dnnmp/marginal.hpp"
#include "dnnmp/mcmc.hpp"
#include "dnnmp/model.hpp"
#include "dnnmp/normal.hpp"
#include "dnnmp/predict.hpp"
#include "dnnmp/random.hpp"
#include "dnnmp/simulate.hpp"
#include "dnnmp/weights.hpp"
