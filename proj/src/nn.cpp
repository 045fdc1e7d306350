#include "novelplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "novelplan/error.hpp"

namespace novelplan::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

std::vector<LayerShape> mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation last) {
  if (dims.size() < 2) throw InputError("mlp needs at least an input and an output dimension");
  std::vector<LayerShape> shapes;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    shapes.push_back({dims[i], dims[i + 1], i + 2 == dims.size() ? last : hidden});
  }
  return shapes;
}

namespace {

template <typename Scalar>
Scalar activate(Activation a, Scalar v) {
  switch (a) {
    case Activation::identity: return v;
    case Activation::relu: return v > Scalar(0) ? v : Scalar(0);
    case Activation::tanh: return std::tanh(v);
    case Activation::sigmoid:
      if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
      else {
        const Scalar e = std::exp(v);
        return e / (Scalar(1) + e);
      }
  }
  return v;
}

// Derivative expressed through the activation output y.
template <typename Scalar>
Scalar activation_slope(Activation a, Scalar y) {
  switch (a) {
    case Activation::identity: return Scalar(1);
    case Activation::relu: return y > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::tanh: return Scalar(1) - y * y;
    case Activation::sigmoid: return y * (Scalar(1) - y);
  }
  return Scalar(1);
}

template <typename Scalar>
void layer_forward(const BasicLayer<Scalar>& l, const Scalar* x, Scalar* y) {
  for (std::size_t o = 0; o < l.out; ++o) {
    const Scalar* w = l.weight.data() + o * l.in;
    Scalar acc = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * x[i];
    y[o] = activate(l.activation, acc);
  }
}

template <typename Scalar>
void check_chain(const std::vector<BasicLayer<Scalar>>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in == 0 || l.out == 0) throw InputError("layer " + std::to_string(i) + " has a zero dimension");
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
      throw InputError("layer " + std::to_string(i) + " parameter sizes do not match its dimensions");
    }
    if (i > 0 && layers[i - 1].out != l.in) {
      throw InputError("layer " + std::to_string(i) + " input dim " + std::to_string(l.in) +
                       " does not chain with previous output dim " + std::to_string(layers[i - 1].out));
    }
  }
}

}  // namespace

template <typename Scalar>
void BasicGradients<Scalar>::accumulate(const BasicGradients& other, Scalar scale) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    for (std::size_t i = 0; i < weight[l].size(); ++i) weight[l][i] += scale * other.weight[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * other.bias[l][i];
  }
}

template <typename Scalar>
bool BasicGradients<Scalar>::all_finite() const {
  auto finite = [](const std::vector<Scalar>& v) {
    return std::all_of(v.begin(), v.end(), [](Scalar s) { return std::isfinite(s); });
  };
  return std::all_of(weight.begin(), weight.end(), finite) && std::all_of(bias.begin(), bias.end(), finite);
}

template <typename Scalar>
BasicDenseNet<Scalar>::BasicDenseNet(std::span<const LayerShape> shapes, std::uint64_t seed) : seed_(seed) {
  if (shapes.empty()) throw InputError("network needs at least one layer");
  std::mt19937_64 rng(seed);
  for (const auto& s : shapes) {
    Layer l;
    l.in = s.in;
    l.out = s.out;
    l.activation = s.activation;
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    l.weight.resize(s.in * s.out);
    for (auto& w : l.weight) w = static_cast<Scalar>(dist(rng));
    l.bias.assign(s.out, Scalar(0));
    layers_.push_back(std::move(l));
  }
  check_chain(layers_);
}

template <typename Scalar>
BasicDenseNet<Scalar>::BasicDenseNet(std::vector<Layer> layers, std::uint64_t seed)
    : layers_(std::move(layers)), seed_(seed) {
  if (layers_.empty()) throw InputError("network needs at least one layer");
  check_chain(layers_);
}

template <typename Scalar>
std::size_t BasicDenseNet<Scalar>::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in;
}

template <typename Scalar>
std::size_t BasicDenseNet<Scalar>::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out;
}

template <typename Scalar>
std::size_t BasicDenseNet<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename Scalar>
std::vector<LayerShape> BasicDenseNet<Scalar>::shapes() const {
  std::vector<LayerShape> s;
  for (const auto& l : layers_) s.push_back({l.in, l.out, l.activation});
  return s;
}

template <typename Scalar>
std::vector<Scalar> BasicDenseNet<Scalar>::forward(std::span<const Scalar> x) const {
  if (x.size() != input_dim()) {
    throw InputError("forward: input has " + std::to_string(x.size()) + " values, network expects " +
                     std::to_string(input_dim()));
  }
  std::vector<Scalar> cur(x.begin(), x.end());
  std::vector<Scalar> next;
  for (const auto& l : layers_) {
    next.resize(l.out);
    layer_forward(l, cur.data(), next.data());
    cur.swap(next);
  }
  return cur;
}

template <typename Scalar>
std::vector<Scalar> BasicDenseNet<Scalar>::forward(std::span<const Scalar> x, ForwardCache& cache) const {
  if (x.size() != input_dim()) {
    throw InputError("forward: input has " + std::to_string(x.size()) + " values, network expects " +
                     std::to_string(input_dim()));
  }
  cache.inputs.resize(layers_.size());
  cache.outputs.resize(layers_.size());
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (i > 0) cache.inputs[i] = cache.outputs[i - 1];
    cache.outputs[i].resize(l.out);
    layer_forward(l, cache.inputs[i].data(), cache.outputs[i].data());
  }
  return cache.outputs.back();
}

template <typename Scalar>
typename BasicDenseNet<Scalar>::Gradients BasicDenseNet<Scalar>::backward(const ForwardCache& cache,
                                                                          std::span<const Scalar> upstream) const {
  Gradients g;
  for (const auto& l : layers_) {
    g.weight.emplace_back(l.weight.size(), Scalar(0));
    g.bias.emplace_back(l.bias.size(), Scalar(0));
  }
  g.input = backward_accumulate(cache, upstream, g, Scalar(1));
  return g;
}

template <typename Scalar>
std::vector<Scalar> BasicDenseNet<Scalar>::backward_accumulate(const ForwardCache& cache,
                                                               std::span<const Scalar> upstream, Gradients& into,
                                                               Scalar scale) const {
  if (cache.empty() || cache.inputs.size() != layers_.size()) {
    throw ContractError("backward called without a cached forward pass for this network");
  }
  if (upstream.size() != output_dim()) {
    throw InputError("backward: upstream gradient has " + std::to_string(upstream.size()) +
                     " values, network output has " + std::to_string(output_dim()));
  }
  if (into.weight.size() != layers_.size() || into.bias.size() != layers_.size()) {
    throw InputError("backward: gradient accumulator does not match the network");
  }
  std::vector<Scalar> delta(upstream.begin(), upstream.end());
  std::vector<Scalar> prev;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const auto& x = cache.inputs[li];
    const auto& y = cache.outputs[li];
    for (std::size_t o = 0; o < l.out; ++o) delta[o] *= activation_slope(l.activation, y[o]);
    auto& dw = into.weight[li];
    auto& db = into.bias[li];
    for (std::size_t o = 0; o < l.out; ++o) {
      Scalar* row = dw.data() + o * l.in;
      const Scalar d = scale * delta[o];
      for (std::size_t i = 0; i < l.in; ++i) row[i] += d * x[i];
      db[o] += scale * delta[o];
    }
    prev.assign(l.in, Scalar(0));
    for (std::size_t o = 0; o < l.out; ++o) {
      const Scalar* w = l.weight.data() + o * l.in;
      const Scalar d = delta[o];
      for (std::size_t i = 0; i < l.in; ++i) prev[i] += w[i] * d;
    }
    delta.swap(prev);
  }
  return delta;
}

template <typename Scalar>
std::vector<typename BasicDenseNet<Scalar>::Layer>& BasicDenseNet<Scalar>::mutable_layers() {
  if (frozen_) throw ContractError("network is frozen; parameters are read-only");
  return layers_;
}

template <typename Scalar>
std::uint64_t BasicDenseNet<Scalar>::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::vector<Scalar>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& l : layers_) {
    feed(l.weight);
    feed(l.bias);
  }
  return h;
}

template struct BasicGradients<float>;
template struct BasicGradients<double>;
template class BasicDenseNet<float>;
template class BasicDenseNet<double>;
template struct BasicGradients<long double>;
template class BasicDenseNet<long double>;

Gradients zero_gradients(const DenseNet& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.weight.emplace_back(l.weight.size(), 0.0f);
    g.bias.emplace_back(l.bias.size(), 0.0f);
  }
  return g;
}

namespace {

void check_rows(const DenseNet& net, std::span<const float> rows) {
  if (net.input_dim() == 0 || rows.size() % net.input_dim() != 0) {
    throw InputError("row batch of " + std::to_string(rows.size()) + " values is not a multiple of input dim " +
                     std::to_string(net.input_dim()));
  }
}

}  // namespace

std::vector<float> forward_rows_serial(const DenseNet& net, std::span<const float> rows) {
  check_rows(net, rows);
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  const std::size_t count = rows.size() / in;
  std::vector<float> result(count * out);
  for (std::size_t r = 0; r < count; ++r) {
    const auto y = net.forward(rows.subspan(r * in, in));
    std::copy(y.begin(), y.end(), result.begin() + static_cast<std::ptrdiff_t>(r * out));
  }
  return result;
}

std::vector<float> forward_rows_parallel(const DenseNet& net, std::span<const float> rows) {
  check_rows(net, rows);
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  const auto count = static_cast<std::ptrdiff_t>(rows.size() / in);
  std::vector<float> result(static_cast<std::size_t>(count) * out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < count; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    const auto y = net.forward(rows.subspan(ur * in, in));
    std::copy(y.begin(), y.end(), result.begin() + static_cast<std::ptrdiff_t>(ur * out));
  }
  return result;
}

OptimizerState::OptimizerState(const DenseNet& net, AdamConfig config) : config_(config) {
  if (!(config.learning_rate >= 0.0)) throw InputError("learning rate must be non-negative");
  if (!(config.beta1 > 0.0 && config.beta1 < 1.0 && config.beta2 > 0.0 && config.beta2 < 1.0)) {
    throw InputError("moment decay rates must lie in (0, 1)");
  }
  for (const auto& l : net.layers()) {
    m_.emplace_back(l.weight.size(), 0.0f);
    m_.emplace_back(l.bias.size(), 0.0f);
    v_.emplace_back(l.weight.size(), 0.0f);
    v_.emplace_back(l.bias.size(), 0.0f);
  }
}

void OptimizerState::apply(DenseNet& net, const Gradients& grads) {
  auto& layers = net.mutable_layers();
  if (m_.size() != 2 * layers.size() || grads.weight.size() != layers.size() || grads.bias.size() != layers.size()) {
    throw InputError("optimizer state does not match the network");
  }
  if (!grads.all_finite()) throw TrainingError("non-finite gradient", step_ + 1);
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  auto update = [&](std::vector<float>& params, const std::vector<float>& g, std::vector<float>& m,
                    std::vector<float>& v) {
    if (params.size() != g.size() || m.size() != params.size()) {
      throw InputError("gradient shape does not match parameter shape");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = lr * (mi / correction1) / (std::sqrt(vi / correction2) + config_.epsilon);
      params[i] = static_cast<float>(params[i] - step);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads.weight[l], m_[2 * l], v_[2 * l]);
    update(layers[l].bias, grads.bias[l], m_[2 * l + 1], v_[2 * l + 1]);
  }
}

double mse(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw InputError("mse: operands must be non-empty and equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mse_loss(std::span<const float> output, std::span<const float> target, std::span<float> output_grad) {
  const double n = static_cast<double>(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) {
    output_grad[i] = static_cast<float>(2.0 * (static_cast<double>(output[i]) - target[i]) / n);
  }
  return mse(output, target);
}

namespace {

std::size_t batch_size_of(const DenseNet& net, std::span<const float> inputs, std::span<const float> targets) {
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  if (inputs.empty() || inputs.size() % in != 0) throw InputError("batch inputs are empty or misshaped");
  const std::size_t batch = inputs.size() / in;
  if (targets.size() != batch * out) {
    throw InputError("batch targets hold " + std::to_string(targets.size()) + " values, expected " +
                     std::to_string(batch * out));
  }
  return batch;
}

}  // namespace

double train_step(DenseNet& net, OptimizerState& opt, std::span<const float> inputs, std::span<const float> targets,
                  const LossFn& loss) {
  const std::size_t batch = batch_size_of(net, inputs, targets);
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  Gradients total = zero_gradients(net);
  ForwardCache cache;
  std::vector<float> grad_out(out);
  double loss_sum = 0.0;
  const float scale = 1.0f / static_cast<float>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto y = net.forward(inputs.subspan(b * in, in), cache);
    loss_sum += loss(y, targets.subspan(b * out, out), grad_out);
    net.backward_accumulate(cache, grad_out, total, scale);
  }
  const double mean_loss = loss_sum / static_cast<double>(batch);
  if (!std::isfinite(mean_loss)) throw TrainingError("non-finite loss", opt.step() + 1);
  opt.apply(net, total);
  return mean_loss;
}

double evaluate_loss(const DenseNet& net, std::span<const float> inputs, std::span<const float> targets) {
  const std::size_t batch = batch_size_of(net, inputs, targets);
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    acc += mse(net.forward(inputs.subspan(b * in, in)), targets.subspan(b * out, out));
  }
  return acc / static_cast<double>(batch);
}

}  // namespace novelplan::nn
