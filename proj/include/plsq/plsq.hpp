#pragma once

#include "plsq/bounds.hpp"
#include "plsq/csv.hpp"
#include "plsq/dataset.hpp"
#include "plsq/errors.hpp"
#include "plsq/estimators.hpp"
#include "plsq/linalg.hpp"
#include "plsq/matrix.hpp"
#include "plsq/risk.hpp"
#include "plsq/rng.hpp"
#include "plsq/simulate.hpp"
#include "plsq/svd.hpp"
