#pragma once

#include <utility>
#include <vector>

#include "novelplan/config.hpp"

namespace novelplan {

// Stages shared by the command line and the acceptance driver. Each takes
// the resolved config and returns in-memory artifacts; persistence is the
// caller's business.

data::Dataset generate_dataset(const RunConfig& config);

// Training and held-out halves, split by episode.
std::pair<data::Dataset, data::Dataset> training_split(const RunConfig& config, const data::Dataset& dataset);

// Images the encoder is pretrained on, per `encoder.corpus`.
std::vector<float> encoder_corpus(const RunConfig& config, const data::Dataset& train);

wm::ObservationCodec train_encoder_stage(const RunConfig& config, const data::Dataset& train,
                                         wm::EncoderReport* report = nullptr);

wm::TransitionModel train_dynamics_stage(const RunConfig& config, const wm::ObservationCodec& codec,
                                         const data::Dataset& train, const data::Dataset& heldout,
                                         wm::TransitionReport* report = nullptr);

vae::NoveltyVae train_vae_stage(const RunConfig& config, const wm::ObservationCodec& codec,
                                const data::Dataset& train, vae::VaeReport* report = nullptr);

// In-distribution latents: every held-out frame. Out-of-distribution latents:
// every frame after the first of episodes driven only by gap actions.
struct OodLatents {
  std::vector<float> in_distribution;
  std::vector<float> out_of_distribution;
};

OodLatents ood_latents(const RunConfig& config, const wm::ObservationCodec& codec, const data::Dataset& heldout);

// Copies environment kind, parameters and action policy from a dataset.
void adopt_dataset_environment(RunConfig& config, const data::Dataset& dataset);

}  // namespace novelplan
