#pragma once

#include <span>

#include "novelplan/sim.hpp"

namespace novelplan {

// Bidirectional mean of squared nearest-neighbor distances:
//   CD(A, B) = mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2
// Both sets must be non-empty.
double chamfer(std::span<const sim::Point> a, std::span<const sim::Point> b);

double chamfer_serial(std::span<const sim::Point> a, std::span<const sim::Point> b);
double chamfer_parallel(std::span<const sim::Point> a, std::span<const sim::Point> b);

}  // namespace novelplan
