#include "novelplan/novelty_vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "novelplan/checkpoint.hpp"
#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::vae {

double kl_standard_normal(std::span<const float> mu, std::span<const float> logvar) {
  if (mu.size() != logvar.size()) throw InputError("kl: mu and logvar lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu[i];
    const double lv = logvar[i];
    acc += 0.5 * (m * m + std::exp(lv) - lv - 1.0);
  }
  return acc;
}

double reconstruction_mse(std::span<const float> y, std::span<const float> z) { return nn::mse(y, z); }

NoveltyVae::NoveltyVae(nn::DenseNet encoder, nn::DenseNet decoder, double beta)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), beta_(beta) {
  if (encoder_.output_dim() != 2 * decoder_.input_dim()) {
    throw InputError("vae encoder must output 2*M values for an M-dim decoder");
  }
  if (decoder_.output_dim() != encoder_.input_dim()) throw InputError("vae decoder must reconstruct the input dim");
  if (!(beta_ >= 0.0)) throw InputError("vae beta must be non-negative");
  encoder_.freeze();
  decoder_.freeze();
}

std::vector<float> NoveltyVae::reconstruct(std::span<const float> z) const {
  if (z.size() != latent_dim()) {
    throw InputError("vae: latent has " + std::to_string(z.size()) + " values, expected " +
                     std::to_string(latent_dim()));
  }
  const auto stats = encoder_.forward(z);
  return decoder_.forward(std::span<const float>(stats).first(bottleneck()));
}

double NoveltyVae::score(std::span<const float> z) const { return reconstruction_mse(reconstruct(z), z); }

std::vector<double> NoveltyVae::score_rows(std::span<const float> latents) const {
  const std::size_t d = latent_dim();
  if (latents.size() % d != 0) throw InputError("vae: latent rows misshaped");
  std::vector<double> out(latents.size() / d);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = score(latents.subspan(i * d, d));
  return out;
}

void NoveltyVae::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(encoder_, dir / "vae_encoder.ckpt");
  save_checkpoint(decoder_, dir / "vae_decoder.ckpt");
  KeyValues kv;
  kv["format_version"] = "1";
  kv["latent_dim"] = std::to_string(latent_dim());
  kv["bottleneck"] = std::to_string(bottleneck());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", beta_);
  kv["beta"] = buf;
  write_key_values(dir / "vae.meta", kv, "novelty VAE sidecar");
}

NoveltyVae NoveltyVae::load(const std::filesystem::path& dir) {
  const auto meta = dir / "vae.meta";
  const auto kv = read_key_values(meta);
  if (require_key(kv, "format_version", meta) != "1") throw LoadError(meta.string() + ": unsupported vae format version");
  const double beta = std::strtod(require_key(kv, "beta", meta).c_str(), nullptr);
  try {
    NoveltyVae v(load_checkpoint(dir / "vae_encoder.ckpt"), load_checkpoint(dir / "vae_decoder.ckpt"), beta);
    if (std::to_string(v.bottleneck()) != require_key(kv, "bottleneck", meta) ||
        std::to_string(v.latent_dim()) != require_key(kv, "latent_dim", meta)) {
      throw LoadError(meta.string() + ": sidecar dimensions disagree with the checkpoints");
    }
    return v;
  } catch (const InputError& e) {
    throw LoadError(dir.string() + ": " + e.what());
  }
}

VaeSampleGrad vae_sample_gradient(const nn::DenseNet& encoder, const nn::DenseNet& decoder, double beta,
                                  std::span<const float> z, std::span<const float> noise) {
  const std::size_t m = decoder.input_dim();
  if (noise.size() != m) throw InputError("vae: noise must have bottleneck size");
  nn::ForwardCache enc_cache;
  nn::ForwardCache dec_cache;
  const auto stats = encoder.forward(z, enc_cache);
  const auto mu = std::span<const float>(stats).first(m);
  const auto logvar = std::span<const float>(stats).subspan(m, m);
  std::vector<float> code(m);
  std::vector<float> sigma(m);
  for (std::size_t i = 0; i < m; ++i) {
    sigma[i] = std::exp(0.5f * logvar[i]);
    code[i] = mu[i] + sigma[i] * noise[i];
  }
  const auto y = decoder.forward(code, dec_cache);

  VaeSampleGrad out;
  std::vector<float> dy(y.size());
  out.loss.reconstruction = nn::mse_loss(y, z, dy);
  out.loss.kl = kl_standard_normal(mu, logvar);
  out.loss.total = out.loss.reconstruction + beta * out.loss.kl;
  out.decoder = decoder.backward(dec_cache, dy);

  const auto& dcode = out.decoder.input;
  std::vector<float> dstats(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    dstats[i] = dcode[i] + static_cast<float>(beta) * mu[i];
    dstats[m + i] = dcode[i] * noise[i] * 0.5f * sigma[i] +
                    static_cast<float>(beta * 0.5 * (std::exp(static_cast<double>(logvar[i])) - 1.0));
  }
  out.encoder = encoder.backward(enc_cache, dstats);
  return out;
}

std::vector<nn::LayerShape> encoder_shapes(std::size_t latent_dim, const VaeConfig& config) {
  return nn::mlp({latent_dim, config.hidden, 2 * config.bottleneck}, nn::Activation::tanh, nn::Activation::identity);
}

std::vector<nn::LayerShape> decoder_shapes(std::size_t latent_dim, const VaeConfig& config) {
  return nn::mlp({config.bottleneck, config.hidden, latent_dim}, nn::Activation::tanh, nn::Activation::identity);
}

NoveltyVae train_vae(std::span<const float> latents, std::size_t latent_dim, const VaeConfig& config,
                     VaeReport* report, std::size_t min_samples) {
  if (latent_dim == 0 || latents.size() % latent_dim != 0) throw InputError("train_vae: latent rows misshaped");
  const std::size_t count = latents.size() / latent_dim;
  if (count < min_samples) {
    throw InputError("train_vae: need at least " + std::to_string(min_samples) + " latents, got " +
                     std::to_string(count));
  }
  if (config.batch == 0) throw InputError("train_vae: batch size must be positive");
  const std::size_t m = config.bottleneck;
  nn::DenseNet encoder(encoder_shapes(latent_dim, config), config.seed);
  nn::DenseNet decoder(decoder_shapes(latent_dim, config), mix_seed(config.seed));
  nn::OptimizerState enc_opt(encoder, nn::AdamConfig{config.learning_rate});
  nn::OptimizerState dec_opt(decoder, nn::AdamConfig{config.learning_rate});

  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw InputError("train_vae: validation fraction must lie in [0, 1)");
  }
  // The trailing rows are held back to pick the epoch whose scores generalize best.
  const auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(count)));
  const std::size_t n_fit = count - n_val;
  if (n_fit == 0) throw InputError("train_vae: validation fraction leaves no training rows");
  const auto val_rows = latents.subspan(n_fit * latent_dim);
  NoveltyVae best;
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(n_fit);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<float> noise(m);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, Stream::train, epoch));
    std::mt19937_64 noise_rng(derive_seed(config.seed, Stream::vae_noise, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    VaeEpochLog log;
    for (std::size_t start = 0; start < n_fit; start += config.batch) {
      const std::size_t end = std::min(n_fit, start + config.batch);
      const float scale = 1.0f / static_cast<float>(end - start);
      auto enc_grad = nn::zero_gradients(encoder);
      auto dec_grad = nn::zero_gradients(decoder);
      for (std::size_t b = start; b < end; ++b) {
        for (auto& e : noise) e = gauss(noise_rng);
        const auto g = vae_sample_gradient(encoder, decoder, config.beta,
                                           latents.subspan(order[b] * latent_dim, latent_dim), noise);
        if (!std::isfinite(g.loss.total)) throw TrainingError("non-finite vae loss", enc_opt.step() + 1);
        enc_grad.accumulate(g.encoder, scale);
        dec_grad.accumulate(g.decoder, scale);
        log.total += g.loss.total;
        log.reconstruction += g.loss.reconstruction;
        log.kl += g.loss.kl;
      }
      enc_opt.apply(encoder, enc_grad);
      dec_opt.apply(decoder, dec_grad);
    }
    const auto n = static_cast<double>(n_fit);
    log.total /= n;
    log.reconstruction /= n;
    log.kl /= n;
    if (n_val > 0) {
      NoveltyVae candidate(encoder, decoder, config.beta);
      const auto scores = candidate.score_rows(val_rows);
      double mean = 0.0;
      for (double v : scores) mean += v;
      log.validation_score = mean / static_cast<double>(scores.size());
      if (log.validation_score < best_score) {
        best_score = log.validation_score;
        best = std::move(candidate);
        if (report) report->best_epoch = epoch;
      }
    }
    if (report) report->epochs.push_back(log);
  }
  if (n_val > 0) return best;
  if (report && config.epochs > 0) report->best_epoch = config.epochs - 1;
  return NoveltyVae(std::move(encoder), std::move(decoder), config.beta);
}

}  // namespace novelplan::vae
