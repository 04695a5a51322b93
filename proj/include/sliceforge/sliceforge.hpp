#pragma once

#include "sliceforge/error.hpp"
#include "sliceforge/fixed_point.hpp"
#include "sliceforge/inner.hpp"
#include "sliceforge/loss.hpp"
#include "sliceforge/matrix.hpp"
#include "sliceforge/model.hpp"
#include "sliceforge/outer.hpp"
#include "sliceforge/quadrature.hpp"
#include "sliceforge/sim.hpp"
#include "sliceforge/simplex.hpp"
