#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "novelplan/cem.hpp"
#include "novelplan/dataset.hpp"
#include "novelplan/eval.hpp"
#include "novelplan/mpc.hpp"
#include "novelplan/novelty_vae.hpp"
#include "novelplan/sim.hpp"
#include "novelplan/world_model.hpp"

namespace novelplan {

// Every tunable as one flat struct. Module seeds are not keys of their own;
// they are derived from `seed` so one number pins a whole run.
struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0: OpenMP default

  sim::EnvKind env_kind = sim::EnvKind::granular;
  sim::EnvParams env;

  data::PolicySpec policy{data::PolicyKind::gapped, data::GapRegion::start_x_positive()};
  std::size_t episodes = 0;  // 0: data::default_episodes(env_kind)
  std::size_t frames = 20;
  double validation_fraction = 0.1;
  std::size_t probe_episodes = 50;

  wm::EncoderConfig encoder;
  // Observations the encoder is pretrained on: "uniform" simulates a separate
  // uniform-policy corpus, "dataset" reuses the training episodes.
  std::string encoder_corpus = "uniform";
  std::size_t encoder_corpus_episodes = 300;
  wm::TransitionConfig dynamics;
  vae::VaeConfig vae;
  plan::PlanConfig plan;

  std::vector<double> eval_weights{0.0, 0.25};
  std::vector<double> sweep_weights = eval::reference_weight_grid();
  std::size_t scenes = 5;
  std::uint64_t scene_seed = 7001;
  std::size_t goal_actions = 3;
  double min_goal_chamfer = 1e-3;
  plan::MpcConfig mpc;
  bool record_seconds = false;
  std::size_t histogram_bins = 20;
  std::size_t strip_episode = 0;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

const std::vector<ConfigKey>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view key);

// "key=value"
void apply_assignment(RunConfig& config, std::string_view assignment);
// Line-oriented key = value text; '#' starts a comment.
void apply_config_text(RunConfig& config, std::istream& is, const std::string& origin = "<config>");
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Every key with its value, sorted; reading it back reproduces `config`.
void write_resolved(std::ostream& os, const RunConfig& config);

// Module configs with their seeds filled in.
wm::EncoderConfig encoder_config(const RunConfig& config);
wm::TransitionConfig dynamics_config(const RunConfig& config);
vae::VaeConfig vae_config(const RunConfig& config);
plan::PlanConfig plan_config(const RunConfig& config);
eval::ExperimentSpec experiment_spec(const RunConfig& config, const std::vector<double>& weights);

std::uint64_t split_seed(const RunConfig& config);
std::uint64_t probe_seed(const RunConfig& config);
std::uint64_t corpus_seed(const RunConfig& config);

}  // namespace novelplan
