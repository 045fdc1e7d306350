#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace novelplan::nn {

enum class Activation { identity, relu, tanh, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
};

// Builds the shape list for an MLP: dims = {in, h1, ..., out}; hidden layers
// use `hidden`, the last layer uses `last`.
std::vector<LayerShape> mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation last);

template <typename Scalar>
struct BasicLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<Scalar> weight;  // out x in, row-major
  std::vector<Scalar> bias;    // out
  Activation activation = Activation::identity;
};

// Per-layer inputs and post-activation outputs recorded by a forward pass.
template <typename Scalar>
struct BasicForwardCache {
  std::vector<std::vector<Scalar>> inputs;
  std::vector<std::vector<Scalar>> outputs;

  bool empty() const { return inputs.empty(); }
  void clear() {
    inputs.clear();
    outputs.clear();
  }
};

template <typename Scalar>
struct BasicGradients {
  std::vector<std::vector<Scalar>> weight;
  std::vector<std::vector<Scalar>> bias;
  std::vector<Scalar> input;

  // Adds `scale * other` to the parameter gradients (input gradient ignored).
  void accumulate(const BasicGradients& other, Scalar scale = Scalar(1));
  bool all_finite() const;
};

template <typename Scalar>
class BasicDenseNet {
 public:
  using Layer = BasicLayer<Scalar>;
  using ForwardCache = BasicForwardCache<Scalar>;
  using Gradients = BasicGradients<Scalar>;

  BasicDenseNet() = default;
  // Uniform [-s, s] initialization with s = sqrt(6 / (in + out)), zero bias.
  BasicDenseNet(std::span<const LayerShape> shapes, std::uint64_t seed);
  explicit BasicDenseNet(std::vector<Layer> layers, std::uint64_t seed = 0);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  std::size_t layer_count() const { return layers_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<LayerShape> shapes() const;

  std::vector<Scalar> forward(std::span<const Scalar> x) const;
  std::vector<Scalar> forward(std::span<const Scalar> x, ForwardCache& cache) const;
  Gradients backward(const ForwardCache& cache, std::span<const Scalar> upstream) const;
  // Adds scale * d(loss)/d(params) into `into` (shaped like the network) and
  // returns d(loss)/d(input).
  std::vector<Scalar> backward_accumulate(const ForwardCache& cache, std::span<const Scalar> upstream,
                                          Gradients& into, Scalar scale) const;

  // After freeze() the parameters can no longer be reached mutably.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::vector<Layer>& mutable_layers();

  // FNV-1a over the raw parameter bytes in checkpoint order.
  std::uint64_t checksum() const;

  template <typename Other>
  BasicDenseNet<Other> cast() const {
    std::vector<BasicLayer<Other>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      BasicLayer<Other> o;
      o.in = l.in;
      o.out = l.out;
      o.activation = l.activation;
      o.weight.assign(l.weight.begin(), l.weight.end());
      o.bias.assign(l.bias.begin(), l.bias.end());
      out.push_back(std::move(o));
    }
    return BasicDenseNet<Other>(std::move(out), seed_);
  }

 private:
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
  bool frozen_ = false;
};

using DenseNet = BasicDenseNet<float>;
using Layer = BasicLayer<float>;
using ForwardCache = BasicForwardCache<float>;
using Gradients = BasicGradients<float>;

Gradients zero_gradients(const DenseNet& net);

// Row-batched inference: `rows` holds `count` inputs back to back.
std::vector<float> forward_rows_serial(const DenseNet& net, std::span<const float> rows);
std::vector<float> forward_rows_parallel(const DenseNet& net, std::span<const float> rows);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment-based adaptive update state; one accumulator per parameter.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const DenseNet& net, AdamConfig config = {});

  // Rejects non-finite gradients with a TrainingError carrying the step index.
  void apply(DenseNet& net, const Gradients& grads);

  std::size_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  // Layout: for layer l, index 2l is the weight, 2l+1 the bias.
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

// Per-sample loss: fills d(loss)/d(output) and returns the loss.
using LossFn = std::function<double(std::span<const float> output, std::span<const float> target,
                                    std::span<float> output_grad)>;

double mse(std::span<const float> a, std::span<const float> b);
double mse_loss(std::span<const float> output, std::span<const float> target, std::span<float> output_grad);

// One optimizer step over a batch (inputs and targets row-major). Returns the
// mean batch loss measured before the update.
double train_step(DenseNet& net, OptimizerState& opt, std::span<const float> inputs,
                  std::span<const float> targets, const LossFn& loss = mse_loss);

// Mean per-sample loss over a batch without touching the parameters.
double evaluate_loss(const DenseNet& net, std::span<const float> inputs, std::span<const float> targets);

}  // namespace novelplan::nn
