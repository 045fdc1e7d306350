#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "novelplan/nn.hpp"

namespace novelplan::vae {

struct VaeConfig {
  std::size_t bottleneck = 8;  // M
  std::size_t hidden = 64;
  double beta = 0.001;
  std::size_t epochs = 150;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  // Share of rows (taken from the end) used only to choose the returned epoch.
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

// KL(N(mu, exp(logvar)) || N(0, I)) summed over dimensions.
double kl_standard_normal(std::span<const float> mu, std::span<const float> logvar);

// Mean over dimensions of (y_d - z_d)^2.
double reconstruction_mse(std::span<const float> y, std::span<const float> z);

// Novelty detector over world-model latents. Scoring encodes with the
// posterior mean only, so scores are deterministic.
class NoveltyVae {
 public:
  NoveltyVae() = default;
  // encoder: D -> 2M (mu then logvar), decoder: M -> D.
  NoveltyVae(nn::DenseNet encoder, nn::DenseNet decoder, double beta);

  std::size_t latent_dim() const { return encoder_.input_dim(); }
  std::size_t bottleneck() const { return decoder_.input_dim(); }
  double beta() const { return beta_; }
  const nn::DenseNet& encoder_net() const { return encoder_; }
  const nn::DenseNet& decoder_net() const { return decoder_; }

  std::vector<float> reconstruct(std::span<const float> z) const;
  double score(std::span<const float> z) const;
  std::vector<double> score_rows(std::span<const float> latents) const;

  // vae_encoder.ckpt, vae_decoder.ckpt, vae.meta
  void save(const std::filesystem::path& dir) const;
  static NoveltyVae load(const std::filesystem::path& dir);

 private:
  nn::DenseNet encoder_;
  nn::DenseNet decoder_;
  double beta_ = 0.0;
};

struct VaeLossTerms {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

// Gradient of the per-sample objective recon + beta * KL for a fixed noise
// draw `noise` (reparameterized code mu + exp(logvar / 2) * noise).
struct VaeSampleGrad {
  VaeLossTerms loss;
  nn::Gradients encoder;
  nn::Gradients decoder;
};

VaeSampleGrad vae_sample_gradient(const nn::DenseNet& encoder, const nn::DenseNet& decoder, double beta,
                                  std::span<const float> z, std::span<const float> noise);

struct VaeEpochLog {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  double validation_score = 0.0;  // mean score of the held-back rows
};

struct VaeReport {
  std::vector<VaeEpochLog> epochs;
  std::size_t best_epoch = 0;
};

// D -> hidden -> 2M (mu, logvar) and M -> hidden -> D.
std::vector<nn::LayerShape> encoder_shapes(std::size_t latent_dim, const VaeConfig& config);
std::vector<nn::LayerShape> decoder_shapes(std::size_t latent_dim, const VaeConfig& config);

// `latents` holds count x latent_dim values back to back. With a nonzero
// validation fraction the parameters of the epoch with the lowest mean
// validation score are returned.
NoveltyVae train_vae(std::span<const float> latents, std::size_t latent_dim, const VaeConfig& config,
                     VaeReport* report = nullptr, std::size_t min_samples = 100);

}  // namespace novelplan::vae
