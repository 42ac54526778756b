#pragma once

#include "rwld/hurst.hpp"
#include "rwld/quadrature.hpp"
#include "rwld/grid.hpp"
#include "rwld/fracspace.hpp"
#include "rwld/parallel.hpp"
#include "rwld/noise.hpp"
#include "rwld/control.hpp"
#include "rwld/kernels.hpp"
#include "rwld/swe.hpp"
#include "rwld/skeleton.hpp"
#include "rwld/ldp.hpp"
#include "rwld/io.hpp"
#include "rwld/verify.hpp"

namespace rwld {
inline constexpr const char* kVersion = "0.1.0";
}
