#include "novelplan/chamfer.hpp"

#include <limits>
#include <vector>

#include "novelplan/error.hpp"

namespace novelplan {

namespace {

void check_sets(std::span<const sim::Point> a, std::span<const sim::Point> b) {
  if (a.empty() || b.empty()) throw InputError("chamfer: point sets must be non-empty");
}

double nearest_sq(const sim::Point& p, std::span<const sim::Point> set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) {
    const double dx = static_cast<double>(p.x) - q.x;
    const double dy = static_cast<double>(p.y) - q.y;
    const double d = dx * dx + dy * dy;
    if (d < best) best = d;
  }
  return best;
}

double directed_serial(std::span<const sim::Point> from, std::span<const sim::Point> to) {
  double acc = 0.0;
  for (const auto& p : from) acc += nearest_sq(p, to);
  return acc / static_cast<double>(from.size());
}

// Per-point minima are computed in parallel and reduced in index order, so the
// result is bit-identical to the serial path.
double directed_parallel(std::span<const sim::Point> from, std::span<const sim::Point> to) {
  std::vector<double> minima(from.size());
  const auto n = static_cast<std::ptrdiff_t>(from.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) minima[static_cast<std::size_t>(i)] = nearest_sq(from[static_cast<std::size_t>(i)], to);
  double acc = 0.0;
  for (double m : minima) acc += m;
  return acc / static_cast<double>(from.size());
}

}  // namespace

double chamfer_serial(std::span<const sim::Point> a, std::span<const sim::Point> b) {
  check_sets(a, b);
  return directed_serial(a, b) + directed_serial(b, a);
}

double chamfer_parallel(std::span<const sim::Point> a, std::span<const sim::Point> b) {
  check_sets(a, b);
  return directed_parallel(a, b) + directed_parallel(b, a);
}

double chamfer(std::span<const sim::Point> a, std::span<const sim::Point> b) {
  // Scene clouds hold a dozen points; threading only pays off for large sets.
  if (a.size() * b.size() >= (1u << 16)) return chamfer_parallel(a, b);
  return chamfer_serial(a, b);
}

}  // namespace novelplan
