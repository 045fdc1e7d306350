#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "novelplan/cem.hpp"
#include "novelplan/dataset.hpp"
#include "novelplan/mpc.hpp"
#include "novelplan/novelty_vae.hpp"
#include "novelplan/raster_io.hpp"
#include "novelplan/world_model.hpp"

namespace novelplan::eval {

std::vector<double> reference_weight_grid();  // {0, 0.125, 0.25, 0.375, 0.5}

struct ExperimentSpec {
  sim::EnvKind kind = sim::EnvKind::granular;
  sim::EnvParams env;
  data::PolicySpec goal_policy{data::PolicyKind::gapped, data::GapRegion::start_x_positive()};
  std::vector<double> weights = reference_weight_grid();
  std::size_t scenes = 5;
  std::uint64_t scene_seed = 7001;
  std::size_t goal_actions = 3;
  // Goal draws closer than this (Chamfer) to the initial state are redrawn.
  double min_goal_chamfer = 1e-3;
  plan::PlanConfig plan;
  plan::MpcConfig mpc;
};

// Evaluation scene: initial state and the goal reached from it by
// `goal_actions` random actions.
struct Scene {
  std::uint64_t seed = 0;  // seed of the accepted goal draw
  sim::ParticleState initial;
  sim::Observation goal_image;
  data::Cloud goal_cloud;
};

std::uint64_t scene_seed(const ExperimentSpec& spec, std::size_t index);
Scene make_scene(const ExperimentSpec& spec, std::size_t index);

struct ResultRow {
  std::string env;
  double w = 0.0;
  std::uint64_t seed = 0;
  double chamfer_final = 0.0;
  double novelty_mean = 0.0;
  double seconds = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct WeightSummary {
  double w = 0.0;
  std::size_t count = 0;
  double chamfer_mean = 0.0;
  double chamfer_std = 0.0;  // sample standard deviation; 0 for a single row
  double novelty_mean = 0.0;
};

struct EvalResult {
  std::vector<ResultRow> rows;  // ordered by (weight, scene)
  std::vector<WeightSummary> summary;
};

// Runs every (weight, scene) pair through MPC. `jobs` chooses whether pairs
// run concurrently; the planner inside each pair is then serial, so rows
// never depend on the worker count.
EvalResult evaluate(const ExperimentSpec& spec, const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                    const vae::NoveltyVae& vae, plan::Evaluation jobs = plan::Evaluation::parallel);

std::vector<WeightSummary> summarize(std::span<const ResultRow> rows);

// env,w,seed,chamfer_final,novelty_mean,seconds. Seconds are written as 0
// unless `with_seconds`, which keeps the file byte-reproducible by default.
void write_results_csv(std::ostream& os, std::span<const ResultRow> rows, bool with_seconds = false);
std::vector<ResultRow> read_results_csv(std::istream& is);
void write_timings_csv(std::ostream& os, std::span<const ResultRow> rows);
// One line per weight: mean +- sample std.
void write_summary(std::ostream& os, std::span<const WeightSummary> summary);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
};

struct OodReport {
  double median_id = 0.0;
  double median_ood = 0.0;
  double ratio = 0.0;  // median_ood / median_id
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
  std::vector<HistogramBin> bins;
};

double median(std::vector<double> values);

OodReport ood_report_from_scores(std::span<const double> id_scores, std::span<const double> ood_scores,
                                 std::size_t bins = 20);
// Latent sets are count x latent_dim back to back.
OodReport ood_report(const vae::NoveltyVae& vae, std::span<const float> id_latents, std::span<const float> ood_latents,
                     std::size_t bins = 20);
void write_histogram_csv(std::ostream& os, const OodReport& report);
void write_ood_summary(std::ostream& os, const OodReport& report);

// Two rows of G x G tiles. Top: the observations after each model step.
// Bottom: decoded open-loop predictions from the first observation under the
// episode's actions. Last column of both rows: the goal image (by default the
// final observation).
Raster rollout_strip(const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                     const data::Episode& episode, const sim::Observation* goal = nullptr);

}  // namespace novelplan::eval
