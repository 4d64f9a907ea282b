#pragma once

#include <optional>

#include "cs2dspec/spectral_core.hpp"

namespace cs2d::detail {

// Active-set refinement for min 0.5 ||h - F x||^2 s.t. ||x||_1 <= radius.
// Starting from the nonzero pattern of `x`, alternates an exact Newton solve
// of the KKT system restricted to the pattern (entries that cross zero are
// dropped) with adding the columns that violate the optimality conditions.
// Returns the last restricted solution, or nothing if no Newton solve
// succeeded. The result is not guaranteed to improve on `x`.
std::optional<ComplexSeries> refine_active_set(const SensingOperator& op, std::span<const Complex> h,
                                               std::span<const Complex> x, double radius);

}  // namespace cs2d::detail
