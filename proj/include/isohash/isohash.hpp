#pragma once

#include "isohash/baselines.hpp"
#include "isohash/column_gen.hpp"
#include "isohash/core.hpp"
#include "isohash/data_io.hpp"
#include "isohash/error.hpp"
#include "isohash/lambda_fit.hpp"
#include "isohash/metrics.hpp"
#include "isohash/parallel.hpp"
#include "isohash/prox.hpp"
#include "isohash/random.hpp"
#include "isohash/solver_admm.hpp"
#include "isohash/theory.hpp"
