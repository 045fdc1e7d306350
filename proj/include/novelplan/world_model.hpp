#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "novelplan/dataset.hpp"
#include "novelplan/nn.hpp"
#include "novelplan/sim.hpp"

namespace novelplan::wm {

using Latent = std::vector<float>;

struct EncoderConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden = 128;
  std::size_t epochs = 15;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct TrainingCurve {
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;  // empty when no validation rows were held back
  std::size_t best_epoch = 0;
};

// Frozen observation encoder f with its paired decoder. Latents leave encode()
// standardized with the per-dimension training statistics.
class ObservationCodec {
 public:
  ObservationCodec() = default;
  ObservationCodec(nn::DenseNet encoder, nn::DenseNet decoder, std::vector<float> mean, std::vector<float> scale,
                   std::size_t grid);

  std::size_t latent_dim() const { return mean_.size(); }
  std::size_t grid() const { return grid_; }

  Latent encode(std::span<const float> pixels) const;
  Latent encode(const sim::Observation& obs) const { return encode(obs.pixels); }
  // `count` images back to back -> `count` latents back to back.
  std::vector<float> encode_rows_serial(std::span<const float> images) const;
  std::vector<float> encode_rows_parallel(std::span<const float> images) const;
  std::vector<float> decode(std::span<const float> latent) const;

  const nn::DenseNet& encoder_net() const { return encoder_; }
  const nn::DenseNet& decoder_net() const { return decoder_; }
  const std::vector<float>& latent_mean() const { return mean_; }
  const std::vector<float>& latent_scale() const { return scale_; }
  std::uint64_t checksum() const;

  // encoder.ckpt, decoder.ckpt, codec.meta
  void save(const std::filesystem::path& dir) const;
  static ObservationCodec load(const std::filesystem::path& dir);

 private:
  nn::DenseNet encoder_;
  nn::DenseNet decoder_;
  std::vector<float> mean_;
  std::vector<float> scale_;
  std::size_t grid_ = 0;
};

struct EncoderReport {
  TrainingCurve curve;
  double train_mse = 0.0;
};

// G^2 -> hidden -> D -> hidden -> G^2; the first two layers become the encoder.
std::vector<nn::LayerShape> autoencoder_shapes(std::size_t grid, const EncoderConfig& config);

// Trains a G^2 -> D -> G^2 autoencoder by pixel MSE, then freezes both halves
// and fixes the latent standardization from the training images.
ObservationCodec pretrain_encoder(std::span<const float> images, std::size_t grid, const EncoderConfig& config,
                                  EncoderReport* report = nullptr);

double reconstruction_mse(const ObservationCodec& codec, std::span<const float> images);
// MSE of predicting every image by the per-pixel mean of `reference`.
double mean_image_baseline_mse(std::span<const float> reference, std::span<const float> images, std::size_t pixels);

// Standardized latents of every frame, plus the actions between them.
struct LatentEpisode {
  std::vector<float> latents;  // (frames + 1) * D
  std::vector<float> actions;  // frames * 4
};

struct LatentDataset {
  std::size_t latent_dim = 0;
  std::size_t frames = 0;
  std::vector<LatentEpisode> episodes;

  std::vector<float> all_latents() const;
};

LatentDataset encode_dataset(const ObservationCodec& codec, const data::Dataset& dataset);

struct TransitionConfig {
  std::size_t window = 1;      // H
  std::size_t frame_skip = 1;  // F
  std::size_t hidden = 128;
  std::size_t epochs = 120;
  std::size_t batch = 32;
  double learning_rate = 3e-4;
  bool dropout = false;
  double dropout_rate = 0.1;
  // Share of training episodes (from the end) held back to choose the returned epoch.
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

// Model step input: H latents (oldest first) and the H*F actions paired with them.
struct RolloutWindow {
  std::vector<float> latents;       // H * D
  std::vector<float> past_actions;  // (H - 1) * F * 4, oldest first
};

// Latent transition g: z_next = z_last + net([latents, actions]).
class TransitionModel {
 public:
  TransitionModel() = default;
  TransitionModel(nn::DenseNet net, std::size_t latent_dim, std::size_t window, std::size_t frame_skip,
                  double dropout_rate = 0.0);

  static std::size_t input_dim_for(std::size_t latent_dim, std::size_t window, std::size_t frame_skip) {
    return window * latent_dim + window * sim::action_dim * frame_skip;
  }

  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t window() const { return window_; }
  std::size_t frame_skip() const { return frame_skip_; }
  std::size_t input_dim() const { return input_dim_for(latent_dim_, window_, frame_skip_); }
  std::size_t step_action_dim() const { return sim::action_dim * frame_skip_; }
  double dropout_rate() const { return dropout_rate_; }
  const nn::DenseNet& net() const { return net_; }

  Latent predict(std::span<const float> latents, std::span<const float> actions) const;
  // `actions` holds T*F actions; returns the T predicted latents in order.
  std::vector<Latent> rollout(const RolloutWindow& initial, std::span<const float> actions) const;
  RolloutWindow initial_window(std::span<const float> latent) const;

  // transition.ckpt + transition.meta; the sidecar repeats the codec's grid
  // and latent statistics so a mismatched pairing is caught at load.
  void save(const std::filesystem::path& dir, const ObservationCodec& codec) const;
  static TransitionModel load(const std::filesystem::path& dir, const ObservationCodec* codec = nullptr);

 private:
  nn::DenseNet net_;
  std::size_t latent_dim_ = 0;
  std::size_t window_ = 1;
  std::size_t frame_skip_ = 1;
  double dropout_rate_ = 0.0;
};

// Teacher-forced training windows: inputs (count x input_dim), residual targets
// (count x D) and the last latent of each window (count x D).
struct TransitionSamples {
  std::vector<float> inputs;
  std::vector<float> residuals;
  std::vector<float> last_latents;
  std::size_t count = 0;
};

TransitionSamples make_transition_samples(const LatentDataset& latents, std::size_t window, std::size_t frame_skip);

struct TransitionReport {
  TrainingCurve curve;
  double heldout_mse = 0.0;
  double identity_mse = 0.0;
};

// input -> hidden -> hidden -> D, tanh hidden layers, linear residual head.
std::vector<nn::LayerShape> transition_shapes(std::size_t latent_dim, const TransitionConfig& config);

TransitionModel train_transition(const LatentDataset& train, const LatentDataset& heldout,
                                 const TransitionConfig& config, TransitionReport* report = nullptr);

// One-step MSE of the model and of the identity predictor on every window.
std::pair<double, double> one_step_mse(const TransitionModel& model, const LatentDataset& latents);
// Mean over windows of the k-th open-loop rollout error.
double k_step_mse(const TransitionModel& model, const LatentDataset& latents, std::size_t k);

}  // namespace novelplan::wm
