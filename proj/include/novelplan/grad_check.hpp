#pragma once

#include <functional>
#include <span>

#include "novelplan/nn.hpp"

namespace novelplan::nn {

// Extended precision keeps the central-difference round-off well under the
// 1e-8 floor of the relative error.
using CheckScalar = long double;
using CheckNet = BasicDenseNet<CheckScalar>;
using BackwardFn = std::function<BasicGradients<CheckScalar>(const CheckNet&, const BasicForwardCache<CheckScalar>&,
                                                             std::span<const CheckScalar> upstream)>;

// Max over every parameter of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// where numeric is a central difference of L = sum_i c_i y_i with fixed
// pseudo-random coefficients c.
double grad_check(const DenseNet& net, std::span<const float> x, double eps);

// Same, with the analytic gradient supplied by `backward` (mutation tests).
double grad_check_with(const DenseNet& net, std::span<const float> x, double eps, const BackwardFn& backward);

}  // namespace novelplan::nn
