#include "novelplan/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <numeric>
#include <random>
#include <string>

#include "novelplan/checkpoint.hpp"
#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::wm {

namespace {

constexpr int meta_format_version = 1;

void check_latent(std::span<const float> z, std::size_t dim, const char* what) {
  if (z.size() != dim) {
    throw InputError(std::string(what) + ": latent has " + std::to_string(z.size()) + " values, expected " +
                     std::to_string(dim));
  }
}

std::size_t parse_size(const KeyValues& kv, const std::string& key, const std::filesystem::path& origin) {
  const auto& s = require_key(kv, key, origin);
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw LoadError(origin.string() + ": '" + key + "' is not an integer");
  return static_cast<std::size_t>(v);
}

// Minibatch loop shared by the autoencoder and transition trainers.
template <class MakeBatch>
TrainingCurve run_epochs(nn::DenseNet& net, std::size_t sample_count, std::size_t epochs, std::size_t batch,
                         double learning_rate, std::uint64_t seed, MakeBatch&& make_batch,
                         const std::function<double(const nn::DenseNet&)>& validate = {}) {
  if (sample_count == 0) throw InputError("training set is empty");
  if (batch == 0) throw InputError("batch size must be positive");
  nn::OptimizerState opt(net, nn::AdamConfig{learning_rate});
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainingCurve curve;
  std::vector<float> inputs;
  std::vector<float> targets;
  std::optional<nn::DenseNet> best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(seed, Stream::train, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < sample_count; start += batch) {
      const std::size_t end = std::min(sample_count, start + batch);
      inputs.clear();
      targets.clear();
      make_batch(std::span<const std::size_t>(order.data() + start, end - start), inputs, targets, rng);
      loss_sum += nn::train_step(net, opt, inputs, targets);
      ++batches;
    }
    curve.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    if (validate) {
      const double v = validate(net);
      curve.validation_loss.push_back(v);
      if (v < best_loss) {
        best_loss = v;
        best = net;
        curve.best_epoch = epoch;
      }
    }
  }
  if (best) net = std::move(*best);
  return curve;
}

}  // namespace

ObservationCodec::ObservationCodec(nn::DenseNet encoder, nn::DenseNet decoder, std::vector<float> mean,
                                   std::vector<float> scale, std::size_t grid)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), mean_(std::move(mean)), scale_(std::move(scale)),
      grid_(grid) {
  if (encoder_.input_dim() != grid_ * grid_ || decoder_.output_dim() != grid_ * grid_) {
    throw InputError("codec networks do not match the " + std::to_string(grid_) + "x" + std::to_string(grid_) +
                     " grid");
  }
  if (encoder_.output_dim() != mean_.size() || decoder_.input_dim() != mean_.size() || scale_.size() != mean_.size()) {
    throw InputError("codec latent dimensions disagree");
  }
  encoder_.freeze();
  decoder_.freeze();
}

Latent ObservationCodec::encode(std::span<const float> pixels) const {
  if (pixels.size() != grid_ * grid_) {
    throw InputError("encode: image has " + std::to_string(pixels.size()) + " pixels, expected " +
                     std::to_string(grid_ * grid_));
  }
  Latent z = encoder_.forward(pixels);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean_[i]) / scale_[i];
  return z;
}

std::vector<float> ObservationCodec::encode_rows_serial(std::span<const float> images) const {
  auto z = nn::forward_rows_serial(encoder_, images);
  const std::size_t d = latent_dim();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean_[i % d]) / scale_[i % d];
  return z;
}

std::vector<float> ObservationCodec::encode_rows_parallel(std::span<const float> images) const {
  auto z = nn::forward_rows_parallel(encoder_, images);
  const std::size_t d = latent_dim();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean_[i % d]) / scale_[i % d];
  return z;
}

std::vector<float> ObservationCodec::decode(std::span<const float> latent) const {
  check_latent(latent, latent_dim(), "decode");
  std::vector<float> raw(latent.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = latent[i] * scale_[i] + mean_[i];
  return decoder_.forward(raw);
}

std::uint64_t ObservationCodec::checksum() const { return encoder_.checksum() ^ (decoder_.checksum() * 31); }

void ObservationCodec::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(encoder_, dir / "encoder.ckpt");
  save_checkpoint(decoder_, dir / "decoder.ckpt");
  KeyValues kv;
  kv["format_version"] = std::to_string(meta_format_version);
  kv["latent_dim"] = std::to_string(latent_dim());
  kv["grid"] = std::to_string(grid_);
  kv["latent_mean"] = join_floats(mean_);
  kv["latent_scale"] = join_floats(scale_);
  write_key_values(dir / "codec.meta", kv, "observation encoder/decoder sidecar");
}

ObservationCodec ObservationCodec::load(const std::filesystem::path& dir) {
  const auto meta = dir / "codec.meta";
  const auto kv = read_key_values(meta);
  if (parse_size(kv, "format_version", meta) != static_cast<std::size_t>(meta_format_version)) {
    throw LoadError(meta.string() + ": unsupported codec format version");
  }
  auto mean = split_floats(require_key(kv, "latent_mean", meta));
  auto scale = split_floats(require_key(kv, "latent_scale", meta));
  const std::size_t d = parse_size(kv, "latent_dim", meta);
  if (mean.size() != d || scale.size() != d) throw LoadError(meta.string() + ": latent statistics length mismatch");
  try {
    return ObservationCodec(load_checkpoint(dir / "encoder.ckpt"), load_checkpoint(dir / "decoder.ckpt"),
                            std::move(mean), std::move(scale), parse_size(kv, "grid", meta));
  } catch (const InputError& e) {
    throw LoadError(dir.string() + ": " + e.what());
  }
}

std::vector<nn::LayerShape> autoencoder_shapes(std::size_t grid, const EncoderConfig& config) {
  const std::size_t pixels = grid * grid;
  const std::size_t h = config.hidden;
  const std::size_t d = config.latent_dim;
  return {{pixels, h, nn::Activation::tanh},
          {h, d, nn::Activation::identity},
          {d, h, nn::Activation::tanh},
          {h, pixels, nn::Activation::sigmoid}};
}

std::vector<nn::LayerShape> transition_shapes(std::size_t latent_dim, const TransitionConfig& config) {
  const std::size_t in_dim = TransitionModel::input_dim_for(latent_dim, config.window, config.frame_skip);
  return nn::mlp({in_dim, config.hidden, config.hidden, latent_dim}, nn::Activation::tanh, nn::Activation::identity);
}

ObservationCodec pretrain_encoder(std::span<const float> images, std::size_t grid, const EncoderConfig& config,
                                  EncoderReport* report) {
  const std::size_t pixels = grid * grid;
  if (pixels == 0 || images.size() % pixels != 0) throw InputError("pretrain_encoder: image buffer is misshaped");
  const std::size_t count = images.size() / pixels;
  if (count < 100) throw InputError("pretrain_encoder: need at least 100 observations, got " + std::to_string(count));

  const std::size_t d = config.latent_dim;
  nn::DenseNet autoencoder(autoencoder_shapes(grid, config), config.seed);
  auto curve = run_epochs(autoencoder, count, config.epochs, config.batch, config.learning_rate, config.seed,
                          [&](std::span<const std::size_t> idx, std::vector<float>& in, std::vector<float>& out,
                              std::mt19937_64&) {
                            for (std::size_t i : idx) {
                              const auto img = images.subspan(i * pixels, pixels);
                              in.insert(in.end(), img.begin(), img.end());
                            }
                            out = in;
                          });

  const auto& layers = autoencoder.layers();
  nn::DenseNet encoder({layers[0], layers[1]}, config.seed);
  nn::DenseNet decoder({layers[2], layers[3]}, config.seed);

  const auto raw = nn::forward_rows_serial(encoder, images);
  std::vector<double> mean(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += raw[i * d + j];
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = raw[i * d + j] - mean[j];
      var[j] += diff * diff;
    }
  }
  std::vector<float> mean_f(d);
  std::vector<float> scale_f(d);
  for (std::size_t j = 0; j < d; ++j) {
    mean_f[j] = static_cast<float>(mean[j]);
    scale_f[j] = static_cast<float>(std::max(std::sqrt(var[j] / static_cast<double>(count)), 1e-6));
  }
  ObservationCodec codec(std::move(encoder), std::move(decoder), std::move(mean_f), std::move(scale_f), grid);
  if (report) {
    report->curve = std::move(curve);
    report->train_mse = reconstruction_mse(codec, images);
  }
  return codec;
}

double reconstruction_mse(const ObservationCodec& codec, std::span<const float> images) {
  const std::size_t pixels = codec.grid() * codec.grid();
  if (images.empty() || images.size() % pixels != 0) throw InputError("reconstruction_mse: misshaped images");
  const std::size_t count = images.size() / pixels;
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto img = images.subspan(i * pixels, pixels);
    acc += nn::mse(codec.decode(codec.encode(img)), img);
  }
  return acc / static_cast<double>(count);
}

double mean_image_baseline_mse(std::span<const float> reference, std::span<const float> images, std::size_t pixels) {
  if (pixels == 0 || reference.empty() || reference.size() % pixels != 0 || images.empty() ||
      images.size() % pixels != 0) {
    throw InputError("mean_image_baseline_mse: misshaped images");
  }
  const std::size_t n_ref = reference.size() / pixels;
  std::vector<double> mean(pixels, 0.0);
  for (std::size_t i = 0; i < n_ref; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) mean[p] += reference[i * pixels + p];
  }
  for (auto& m : mean) m /= static_cast<double>(n_ref);
  const std::size_t n = images.size() / pixels;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const double diff = images[i * pixels + p] - mean[p];
      acc += diff * diff;
    }
  }
  return acc / static_cast<double>(n * pixels);
}

std::vector<float> LatentDataset::all_latents() const {
  std::vector<float> out;
  for (const auto& ep : episodes) out.insert(out.end(), ep.latents.begin(), ep.latents.end());
  return out;
}

LatentDataset encode_dataset(const ObservationCodec& codec, const data::Dataset& dataset) {
  if (dataset.params.grid != codec.grid()) {
    throw InputError("encode_dataset: dataset grid " + std::to_string(dataset.params.grid) +
                     " does not match encoder grid " + std::to_string(codec.grid()));
  }
  LatentDataset out;
  out.latent_dim = codec.latent_dim();
  out.frames = dataset.frames;
  const auto latents = codec.encode_rows_parallel(data::stack_observations(dataset));
  const std::size_t per_episode = (dataset.frames + 1) * out.latent_dim;
  for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
    LatentEpisode ep;
    const auto base = latents.begin() + static_cast<std::ptrdiff_t>(e * per_episode);
    ep.latents.assign(base, base + static_cast<std::ptrdiff_t>(per_episode));
    for (const auto& a : dataset.episodes[e].actions) ep.actions.insert(ep.actions.end(), a.begin(), a.end());
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

TransitionModel::TransitionModel(nn::DenseNet net, std::size_t latent_dim, std::size_t window, std::size_t frame_skip,
                                 double dropout_rate)
    : net_(std::move(net)), latent_dim_(latent_dim), window_(window), frame_skip_(frame_skip),
      dropout_rate_(dropout_rate) {
  if (window_ == 0 || frame_skip_ == 0) throw InputError("window and frame skip must be at least 1");
  if (net_.input_dim() != input_dim()) {
    throw InputError("transition net input dim " + std::to_string(net_.input_dim()) + " != H*D + H*4*F = " +
                     std::to_string(input_dim()));
  }
  if (net_.output_dim() != latent_dim_) throw InputError("transition net output dim must equal the latent dim");
  net_.freeze();
}

Latent TransitionModel::predict(std::span<const float> latents, std::span<const float> actions) const {
  if (latents.size() != window_ * latent_dim_) {
    throw InputError("predict: expected " + std::to_string(window_ * latent_dim_) + " latent values, got " +
                     std::to_string(latents.size()));
  }
  if (actions.size() != window_ * step_action_dim()) {
    throw InputError("predict: expected " + std::to_string(window_ * step_action_dim()) + " action values, got " +
                     std::to_string(actions.size()));
  }
  std::vector<float> input;
  input.reserve(input_dim());
  input.insert(input.end(), latents.begin(), latents.end());
  input.insert(input.end(), actions.begin(), actions.end());
  Latent z = net_.forward(input);
  const auto last = latents.subspan((window_ - 1) * latent_dim_, latent_dim_);
  for (std::size_t i = 0; i < latent_dim_; ++i) z[i] += last[i];
  return z;
}

RolloutWindow TransitionModel::initial_window(std::span<const float> latent) const {
  check_latent(latent, latent_dim_, "initial_window");
  RolloutWindow w;
  for (std::size_t i = 0; i < window_; ++i) w.latents.insert(w.latents.end(), latent.begin(), latent.end());
  w.past_actions.assign((window_ - 1) * step_action_dim(), 0.0f);
  return w;
}

std::vector<Latent> TransitionModel::rollout(const RolloutWindow& initial, std::span<const float> actions) const {
  const std::size_t chunk = step_action_dim();
  if (actions.size() % chunk != 0) {
    throw InputError("rollout: " + std::to_string(actions.size() / sim::action_dim) +
                     " actions is not a multiple of the frame skip " + std::to_string(frame_skip_));
  }
  if (initial.past_actions.size() != (window_ - 1) * chunk) throw InputError("rollout: window action history misshaped");
  const std::size_t steps = actions.size() / chunk;
  std::vector<Latent> out;
  out.reserve(steps);
  std::vector<float> latents = initial.latents;
  std::vector<float> acts = initial.past_actions;
  acts.resize(window_ * chunk);
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy_n(actions.begin() + static_cast<std::ptrdiff_t>(t * chunk), chunk,
                acts.begin() + static_cast<std::ptrdiff_t>((window_ - 1) * chunk));
    Latent z = predict(latents, acts);
    latents.erase(latents.begin(), latents.begin() + static_cast<std::ptrdiff_t>(latent_dim_));
    latents.insert(latents.end(), z.begin(), z.end());
    acts.erase(acts.begin(), acts.begin() + static_cast<std::ptrdiff_t>(chunk));
    acts.resize(window_ * chunk);
    out.push_back(std::move(z));
  }
  return out;
}

void TransitionModel::save(const std::filesystem::path& dir, const ObservationCodec& codec) const {
  if (codec.latent_dim() != latent_dim_) throw InputError("transition save: codec latent dim mismatch");
  std::filesystem::create_directories(dir);
  save_checkpoint(net_, dir / "transition.ckpt");
  KeyValues kv;
  kv["format_version"] = std::to_string(meta_format_version);
  kv["latent_dim"] = std::to_string(latent_dim_);
  kv["window"] = std::to_string(window_);
  kv["frame_skip"] = std::to_string(frame_skip_);
  kv["grid"] = std::to_string(codec.grid());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", dropout_rate_);
  kv["dropout_rate"] = buf;
  kv["latent_mean"] = join_floats(codec.latent_mean());
  kv["latent_scale"] = join_floats(codec.latent_scale());
  write_key_values(dir / "transition.meta", kv, "latent transition model sidecar");
}

TransitionModel TransitionModel::load(const std::filesystem::path& dir, const ObservationCodec* codec) {
  const auto meta = dir / "transition.meta";
  const auto kv = read_key_values(meta);
  if (parse_size(kv, "format_version", meta) != static_cast<std::size_t>(meta_format_version)) {
    throw LoadError(meta.string() + ": unsupported transition format version");
  }
  const std::size_t d = parse_size(kv, "latent_dim", meta);
  if (codec) {
    if (codec->latent_dim() != d || codec->grid() != parse_size(kv, "grid", meta)) {
      throw ConfigError(meta.string() + ": transition model was trained for a different encoder (latent dim/grid)");
    }
    if (split_floats(require_key(kv, "latent_mean", meta)) != codec->latent_mean() ||
        split_floats(require_key(kv, "latent_scale", meta)) != codec->latent_scale()) {
      throw ConfigError(meta.string() + ": transition model latent statistics differ from the encoder's");
    }
  }
  try {
    return TransitionModel(load_checkpoint(dir / "transition.ckpt"), d, parse_size(kv, "window", meta),
                           parse_size(kv, "frame_skip", meta), std::strtod(require_key(kv, "dropout_rate", meta).c_str(), nullptr));
  } catch (const InputError& e) {
    throw LoadError(dir.string() + ": " + e.what());
  }
}

TransitionSamples make_transition_samples(const LatentDataset& latents, std::size_t window, std::size_t frame_skip) {
  if (window == 0 || frame_skip == 0) throw InputError("window and frame skip must be at least 1");
  const std::size_t frames = latents.frames;
  if (window * frame_skip > frames) {
    throw InputError("window H*F = " + std::to_string(window * frame_skip) + " is longer than the " +
                     std::to_string(frames) + "-step episodes");
  }
  const std::size_t d = latents.latent_dim;
  TransitionSamples s;
  for (const auto& ep : latents.episodes) {
    // Anchor i: latents at i-(H-1)F, ..., i; actions a_{i-(H-1)F} .. a_{i+F-1}; target z_{i+F}.
    for (std::size_t i = (window - 1) * frame_skip; i + frame_skip <= frames; ++i) {
      const std::size_t first = i - (window - 1) * frame_skip;
      for (std::size_t h = 0; h < window; ++h) {
        const std::size_t f = first + h * frame_skip;
        s.inputs.insert(s.inputs.end(), ep.latents.begin() + static_cast<std::ptrdiff_t>(f * d),
                        ep.latents.begin() + static_cast<std::ptrdiff_t>((f + 1) * d));
      }
      s.inputs.insert(s.inputs.end(), ep.actions.begin() + static_cast<std::ptrdiff_t>(first * sim::action_dim),
                      ep.actions.begin() + static_cast<std::ptrdiff_t>((i + frame_skip) * sim::action_dim));
      const auto last = ep.latents.begin() + static_cast<std::ptrdiff_t>(i * d);
      const auto target = ep.latents.begin() + static_cast<std::ptrdiff_t>((i + frame_skip) * d);
      for (std::size_t j = 0; j < d; ++j) s.residuals.push_back(target[static_cast<std::ptrdiff_t>(j)] - last[static_cast<std::ptrdiff_t>(j)]);
      s.last_latents.insert(s.last_latents.end(), last, last + static_cast<std::ptrdiff_t>(d));
      ++s.count;
    }
  }
  return s;
}

TransitionModel train_transition(const LatentDataset& train_all, const LatentDataset& heldout,
                                 const TransitionConfig& config, TransitionReport* report) {
  const std::size_t d = train_all.latent_dim;
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw InputError("transition validation fraction must lie in [0, 1)");
  }
  // Trailing training episodes are held back to choose the epoch; `heldout` is never looked at here.
  const std::size_t n_ep = train_all.episodes.size();
  const auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n_ep)));
  if (n_val >= n_ep) throw InputError("transition validation fraction leaves no training episodes");
  LatentDataset train{d, train_all.frames, {train_all.episodes.begin(), train_all.episodes.end() - static_cast<std::ptrdiff_t>(n_val)}};
  LatentDataset val{d, train_all.frames, {train_all.episodes.end() - static_cast<std::ptrdiff_t>(n_val), train_all.episodes.end()}};
  const auto samples = make_transition_samples(train, config.window, config.frame_skip);
  const std::size_t in_dim = TransitionModel::input_dim_for(d, config.window, config.frame_skip);
  nn::DenseNet net(transition_shapes(d, config), config.seed);
  // Zero residual head: training starts from the identity predictor.
  auto& head = net.mutable_layers().back();
  std::fill(head.weight.begin(), head.weight.end(), 0.0f);
  std::fill(head.bias.begin(), head.bias.end(), 0.0f);

  const double rate = config.dropout ? config.dropout_rate : 0.0;
  if (!(rate >= 0.0 && rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
  auto curve = run_epochs(
      net, samples.count, config.epochs, config.batch, config.learning_rate, config.seed,
      [&](std::span<const std::size_t> idx, std::vector<float>& in, std::vector<float>& out, std::mt19937_64& rng) {
        std::bernoulli_distribution keep(1.0 - rate);
        const auto inv = static_cast<float>(1.0 / (1.0 - rate));
        for (std::size_t i : idx) {
          const auto row = std::span<const float>(samples.inputs).subspan(i * in_dim, in_dim);
          for (float v : row) in.push_back(rate > 0.0 ? (keep(rng) ? v * inv : 0.0f) : v);
          const auto res = std::span<const float>(samples.residuals).subspan(i * d, d);
          out.insert(out.end(), res.begin(), res.end());
        }
      },
      n_val == 0 ? std::function<double(const nn::DenseNet&)>{} : [&](const nn::DenseNet& candidate) {
        return one_step_mse(TransitionModel(candidate, d, config.window, config.frame_skip, rate), val).first;
      });

  TransitionModel model(std::move(net), d, config.window, config.frame_skip, rate);
  if (report) {
    report->curve = std::move(curve);
    const auto [model_mse, identity_mse] = one_step_mse(model, heldout);
    report->heldout_mse = model_mse;
    report->identity_mse = identity_mse;
  }
  return model;
}

std::pair<double, double> one_step_mse(const TransitionModel& model, const LatentDataset& latents) {
  const auto s = make_transition_samples(latents, model.window(), model.frame_skip());
  if (s.count == 0) throw InputError("one_step_mse: no windows");
  const std::size_t d = model.latent_dim();
  const std::size_t in_dim = model.input_dim();
  const std::size_t lat = model.window() * d;
  double model_acc = 0.0;
  double identity_acc = 0.0;
  const std::vector<float> zero(d, 0.0f);
  for (std::size_t i = 0; i < s.count; ++i) {
    const auto row = std::span<const float>(s.inputs).subspan(i * in_dim, in_dim);
    const auto pred = model.predict(row.first(lat), row.subspan(lat));
    const auto last = std::span<const float>(s.last_latents).subspan(i * d, d);
    const auto res = std::span<const float>(s.residuals).subspan(i * d, d);
    std::vector<float> target(d);
    for (std::size_t j = 0; j < d; ++j) target[j] = last[j] + res[j];
    model_acc += nn::mse(pred, target);
    identity_acc += nn::mse(last, target);
  }
  return {model_acc / static_cast<double>(s.count), identity_acc / static_cast<double>(s.count)};
}

double k_step_mse(const TransitionModel& model, const LatentDataset& latents, std::size_t k) {
  if (k == 0) throw InputError("k_step_mse: k must be positive");
  const std::size_t d = model.latent_dim();
  const std::size_t f = model.frame_skip();
  const std::size_t h = model.window();
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& ep : latents.episodes) {
    for (std::size_t i = (h - 1) * f; i + k * f <= latents.frames; ++i) {
      RolloutWindow w;
      const std::size_t first = i - (h - 1) * f;
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t fr = first + j * f;
        w.latents.insert(w.latents.end(), ep.latents.begin() + static_cast<std::ptrdiff_t>(fr * d),
                         ep.latents.begin() + static_cast<std::ptrdiff_t>((fr + 1) * d));
      }
      w.past_actions.assign(ep.actions.begin() + static_cast<std::ptrdiff_t>(first * sim::action_dim),
                            ep.actions.begin() + static_cast<std::ptrdiff_t>(i * sim::action_dim));
      const auto acts = std::span<const float>(ep.actions).subspan(i * sim::action_dim, k * f * sim::action_dim);
      const auto preds = model.rollout(w, acts);
      const auto truth = std::span<const float>(ep.latents).subspan((i + k * f) * d, d);
      acc += nn::mse(preds.back(), truth);
      ++n;
    }
  }
  if (n == 0) throw InputError("k_step_mse: episodes too short for k steps");
  return acc / static_cast<double>(n);
}

}  // namespace novelplan::wm
