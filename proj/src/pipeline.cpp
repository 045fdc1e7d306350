#include "novelplan/pipeline.hpp"

#include "novelplan/error.hpp"

namespace novelplan {

data::Dataset generate_dataset(const RunConfig& c) {
  const std::size_t n = c.episodes ? c.episodes : data::default_episodes(c.env_kind);
  return data::generate(c.env_kind, c.policy, n, c.frames, c.seed, c.env);
}

std::pair<data::Dataset, data::Dataset> training_split(const RunConfig& c, const data::Dataset& dataset) {
  return data::split(dataset, c.validation_fraction, split_seed(c));
}

std::vector<float> encoder_corpus(const RunConfig& c, const data::Dataset& train) {
  if (c.encoder_corpus == "dataset") return data::stack_observations(train);
  const data::PolicySpec uniform{data::PolicyKind::uniform, train.policy.gap};
  return data::stack_observations(
      data::generate(train.kind, uniform, c.encoder_corpus_episodes, train.frames, corpus_seed(c), train.params));
}

wm::ObservationCodec train_encoder_stage(const RunConfig& c, const data::Dataset& train, wm::EncoderReport* report) {
  const auto images = encoder_corpus(c, train);
  return wm::pretrain_encoder(images, train.params.grid, encoder_config(c), report);
}

wm::TransitionModel train_dynamics_stage(const RunConfig& c, const wm::ObservationCodec& codec,
                                         const data::Dataset& train, const data::Dataset& heldout,
                                         wm::TransitionReport* report) {
  const auto tr = wm::encode_dataset(codec, train);
  const auto ho = wm::encode_dataset(codec, heldout);
  return wm::train_transition(tr, ho, dynamics_config(c), report);
}

vae::NoveltyVae train_vae_stage(const RunConfig& c, const wm::ObservationCodec& codec, const data::Dataset& train,
                                vae::VaeReport* report) {
  const auto latents = wm::encode_dataset(codec, train).all_latents();
  return vae::train_vae(latents, codec.latent_dim(), vae_config(c), report);
}

OodLatents ood_latents(const RunConfig& c, const wm::ObservationCodec& codec, const data::Dataset& heldout) {
  if (heldout.policy.kind != data::PolicyKind::gapped) {
    throw ConfigError("ood report: the dataset was not generated with a gapped policy");
  }
  OodLatents out;
  out.in_distribution = wm::encode_dataset(codec, heldout).all_latents();
  const auto probe =
      data::generate_gap_probe(heldout.kind, heldout.policy.gap, c.probe_episodes, heldout.frames, probe_seed(c),
                               heldout.params);
  const auto latents = wm::encode_dataset(codec, probe);
  const std::size_t d = latents.latent_dim;
  for (const auto& ep : latents.episodes) {
    out.out_of_distribution.insert(out.out_of_distribution.end(), ep.latents.begin() + static_cast<std::ptrdiff_t>(d),
                                   ep.latents.end());
  }
  return out;
}

void adopt_dataset_environment(RunConfig& c, const data::Dataset& dataset) {
  c.env_kind = dataset.kind;
  c.env = dataset.params;
  c.policy = dataset.policy;
}

}  // namespace novelplan
