#pragma once

#include "errors.hpp"
#include "gamma.hpp"
#include "quadrature.hpp"
#include "mittag_leffler.hpp"
#include "kernels.hpp"
#include "grid.hpp"
#include "polynomial.hpp"
#include "system.hpp"
#include "spectral.hpp"
#include "fde_solver.hpp"
#include "lp_operator.hpp"
#include "counterexample.hpp"
