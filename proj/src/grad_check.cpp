#include "novelplan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "novelplan/error.hpp"

namespace novelplan::nn {

namespace {

using Real = CheckScalar;

Real apply_activation(Activation a, Real v) {
  switch (a) {
    case Activation::identity: return v;
    case Activation::relu: return v > 0 ? v : Real(0);
    case Activation::tanh: return std::tanh(v);
    case Activation::sigmoid: return Real(1) / (Real(1) + std::exp(-v));
  }
  return v;
}

Real pre_activation(const BasicLayer<Real>& l, std::span<const Real> x, std::size_t o) {
  const Real* w = l.weight.data() + o * l.in;
  Real acc = l.bias[o];
  for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * x[i];
  return acc;
}

// Evaluates the objective after output unit `unit` of layer `from` takes
// `value`. The layer right after `from` is updated incrementally from its
// cached pre-activations; later layers are recomputed in full.
class Objective {
 public:
  Objective(const CheckNet& net, const BasicForwardCache<Real>& cache, std::span<const Real> coeff)
      : net_(net), cache_(cache), coeff_(coeff) {
    for (std::size_t li = 0; li < net.layer_count(); ++li) {
      const auto& l = net.layers()[li];
      std::vector<Real> pre(l.out);
      for (std::size_t o = 0; o < l.out; ++o) pre[o] = pre_activation(l, cache.inputs[li], o);
      pre_.push_back(std::move(pre));
    }
  }

  Real operator()(std::size_t from, std::size_t unit, Real value) {
    const auto& layers = net_.layers();
    if (from + 1 == layers.size()) {
      Real obj = 0;
      const auto& out = cache_.outputs[from];
      for (std::size_t i = 0; i < out.size(); ++i) obj += coeff_[i] * (i == unit ? value : out[i]);
      return obj;
    }
    const Real delta = value - cache_.outputs[from][unit];
    const auto& next = layers[from + 1];
    cur_.resize(next.out);
    for (std::size_t o = 0; o < next.out; ++o) {
      cur_[o] = apply_activation(next.activation, pre_[from + 1][o] + next.weight[o * next.in + unit] * delta);
    }
    for (std::size_t li = from + 2; li < layers.size(); ++li) {
      const auto& l = layers[li];
      tmp_.resize(l.out);
      for (std::size_t o = 0; o < l.out; ++o) tmp_[o] = apply_activation(l.activation, pre_activation(l, cur_, o));
      cur_.swap(tmp_);
    }
    Real obj = 0;
    for (std::size_t i = 0; i < cur_.size(); ++i) obj += coeff_[i] * cur_[i];
    return obj;
  }

 private:
  const CheckNet& net_;
  const BasicForwardCache<Real>& cache_;
  std::span<const Real> coeff_;
  std::vector<std::vector<Real>> pre_;
  std::vector<Real> cur_;
  std::vector<Real> tmp_;
};

double relative_error(Real analytic, Real numeric) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), Real(1e-8)});
  return static_cast<double>(std::abs(analytic - numeric) / denom);
}

}  // namespace

double grad_check(const DenseNet& net, std::span<const float> x, double eps) {
  return grad_check_with(net, x, eps, [](const CheckNet& n, const BasicForwardCache<Real>& c, std::span<const Real> up) {
    return n.backward(c, up);
  });
}

double grad_check_with(const DenseNet& net, std::span<const float> x, double eps, const BackwardFn& backward) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw InputError("grad_check: eps must lie in [1e-7, 1e-3]");
  CheckNet rnet = net.cast<Real>();
  const std::vector<Real> xr(x.begin(), x.end());
  BasicForwardCache<Real> cache;
  rnet.forward(xr, cache);
  for (std::size_t li = 0; li < cache.outputs.size(); ++li) {
    for (Real v : cache.outputs[li]) {
      if (!std::isfinite(v)) throw NumericError("grad_check: non-finite activation in layer " + std::to_string(li));
    }
  }

  std::mt19937_64 rng(0x9c4a11d3ULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Real> coeff(rnet.output_dim());
  for (auto& c : coeff) c = dist(rng);

  const auto grads = backward(rnet, cache, coeff);
  if (grads.weight.size() != rnet.layer_count() || grads.bias.size() != rnet.layer_count()) {
    throw InputError("grad_check: gradient layout does not match the network");
  }

  Objective objective(rnet, cache, coeff);
  const Real h = eps;
  double worst = 0.0;
  for (std::size_t li = 0; li < rnet.layer_count(); ++li) {
    const auto& l = rnet.layers()[li];
    const auto& in = cache.inputs[li];
    // Perturbing W[o][i] by +-h shifts the pre-activation of unit o by +-h * in[i].
    auto probe = [&](std::size_t o, Real input, Real analytic) {
      const Real pre = pre_activation(l, in, o);
      const Real plus = objective(li, o, apply_activation(l.activation, pre + h * input));
      const Real minus = objective(li, o, apply_activation(l.activation, pre - h * input));
      const Real numeric = (plus - minus) / (2 * h);
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw NumericError("grad_check: non-finite gradient in layer " + std::to_string(li));
      }
      worst = std::max(worst, relative_error(analytic, numeric));
    };
    for (std::size_t o = 0; o < l.out; ++o) {
      for (std::size_t i = 0; i < l.in; ++i) probe(o, in[i], grads.weight[li][o * l.in + i]);
      probe(o, Real(1), grads.bias[li][o]);
    }
  }
  return worst;
}

}  // namespace novelplan::nn
