#pragma once

// Everything at once.

#include "bfm/error.hpp"
#include "bfm/random.hpp"
#include "bfm/graded_vector.hpp"
#include "bfm/frechet.hpp"
#include "bfm/lipschitz.hpp"
#include "bfm/expr.hpp"
#include "bfm/calculus.hpp"
#include "bfm/charts.hpp"
#include "bfm/connections.hpp"
#include "bfm/integrator.hpp"
#include "bfm/config.hpp"
#include "bfm/experiment.hpp"
