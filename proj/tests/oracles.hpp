#pragma once

// Independent reference computations the tests compare the library against.
// None of these call into the code they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "novelplan/nn.hpp"
#include "novelplan/sim.hpp"

namespace oracle {

// Exhaustive nearest neighbours in long double.
inline double chamfer(std::span<const novelplan::sim::Point> a, std::span<const novelplan::sim::Point> b) {
  auto one_way = [](std::span<const novelplan::sim::Point> from, std::span<const novelplan::sim::Point> to) {
    long double sum = 0;
    for (const auto& p : from) {
      long double best = std::numeric_limits<long double>::infinity();
      for (const auto& q : to) {
        const long double dx = static_cast<long double>(p.x) - q.x;
        const long double dy = static_cast<long double>(p.y) - q.y;
        best = std::min(best, dx * dx + dy * dy);
      }
      sum += best;
    }
    return sum / static_cast<long double>(from.size());
  };
  return static_cast<double>(one_way(a, b) + one_way(b, a));
}

// Scalar-by-scalar evaluator working straight off the layer arrays.
inline std::vector<double> forward(const novelplan::nn::DenseNet& net, std::span<const float> x) {
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& l : net.layers()) {
    std::vector<double> next(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double s = l.bias[o];
      for (std::size_t i = 0; i < l.in; ++i) s += static_cast<double>(l.weight[o * l.in + i]) * cur[i];
      switch (l.activation) {
        case novelplan::nn::Activation::identity: next[o] = s; break;
        case novelplan::nn::Activation::relu: next[o] = std::max(s, 0.0); break;
        case novelplan::nn::Activation::tanh: next[o] = std::tanh(s); break;
        case novelplan::nn::Activation::sigmoid: next[o] = 1.0 / (1.0 + std::exp(-s)); break;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Replays one pusher sweep on free particles (no rope links): substep
// centres at t = k / S for k = 0..S, radial projection to the contact radius,
// clamping to the unit square.
inline std::vector<novelplan::sim::Point> sweep(std::vector<novelplan::sim::Point> pts, const novelplan::sim::Action& a,
                                                 double pusher_radius, double particle_radius, std::size_t substeps,
                                                 double* final_cx = nullptr, double* final_cy = nullptr) {
  auto unit = [](float v) { return (std::clamp(static_cast<double>(v), -1.0, 1.0) + 1.0) / 2.0; };
  const double sx = unit(a[0]), sy = unit(a[1]), ex = unit(a[2]), ey = unit(a[3]);
  const double contact = pusher_radius + static_cast<double>(static_cast<float>(particle_radius));
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.x);
    y.push_back(p.y);
  }
  double cx = sx, cy = sy;
  for (std::size_t k = 0; k <= substeps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(substeps);
    cx = sx + t * (ex - sx);
    cy = sy + t * (ey - sy);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = x[i] - cx, dy = y[i] - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d >= contact || d == 0.0) continue;
      x[i] = std::clamp(cx + contact * dx / d, 0.0, 1.0);
      y[i] = std::clamp(cy + contact * dy / d, 0.0, 1.0);
    }
  }
  if (final_cx) *final_cx = cx;
  if (final_cy) *final_cy = cy;
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {static_cast<float>(x[i]), static_cast<float>(y[i])};
  return pts;
}

// Per-dimension population mean and variance with a floor.
struct Moments {
  std::vector<double> mean;
  std::vector<double> variance;
};

inline Moments elite_moments(const std::vector<std::vector<float>>& elites, double floor) {
  Moments m;
  const std::size_t dim = elites.front().size();
  for (std::size_t i = 0; i < dim; ++i) {
    long double s = 0;
    for (const auto& e : elites) s += e[i];
    const long double mu = s / elites.size();
    long double v = 0;
    for (const auto& e : elites) v += (e[i] - mu) * (e[i] - mu);
    m.mean.push_back(static_cast<double>(mu));
    m.variance.push_back(std::max(static_cast<double>(v / elites.size()), floor));
  }
  return m;
}

}  // namespace oracle
