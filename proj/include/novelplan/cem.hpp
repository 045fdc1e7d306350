#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "novelplan/novelty_vae.hpp"
#include "novelplan/world_model.hpp"

namespace novelplan::plan {

struct CostBreakdown {
  double goal = 0.0;             // L_g
  std::vector<double> novelty;   // L_r per predicted latent
  double total = 0.0;            // L_g + w * sum(L_r)

  double novelty_sum() const;
};

// Must be safe to call concurrently.
using CostFn = std::function<CostBreakdown(std::span<const float> actions)>;

struct PlanConfig {
  std::size_t samples = 128;
  std::size_t elites = 16;
  std::size_t horizon = 5;
  double weight = 0.25;
  std::size_t max_iterations = 10;
  double convergence = 1e-3;
  double variance_floor = 1e-4;
  std::uint64_t seed = 0;
};

void validate(const PlanConfig& config);

// Element-wise Gaussian over the flat T x 4F trajectory.
struct TrajectoryDistribution {
  std::vector<double> mean;
  std::vector<double> variance;
  std::size_t iteration = 0;
};

// Population (divide-by-k) mean and variance of the elites, variance floored.
TrajectoryDistribution refit(std::span<const std::vector<float>> elites, double variance_floor = 1e-4);

// Draws `count` clipped trajectories from `dist`, row-major count x dim.
std::vector<float> sample_trajectories(const TrajectoryDistribution& dist, std::size_t count, std::mt19937_64& rng);

std::vector<CostBreakdown> evaluate_batch_serial(const CostFn& cost, std::span<const float> samples, std::size_t dim);
std::vector<CostBreakdown> evaluate_batch_parallel(const CostFn& cost, std::span<const float> samples,
                                                   std::size_t dim);

struct IterationLog {
  std::size_t iteration = 0;
  double best_total = 0.0;
  double best_goal = 0.0;
  double best_novelty = 0.0;
  double mean_total = 0.0;
  double mean_shift = 0.0;
};

struct PlanResult {
  std::vector<float> actions;  // incumbent: lowest-cost sample seen
  CostBreakdown cost;
  std::vector<IterationLog> log;
  TrajectoryDistribution distribution;
  std::vector<std::size_t> last_elites;  // sample indices of the final elite set
};

enum class Evaluation { serial, parallel };

// CEM over a `dim`-dimensional trajectory starting from N(0, I).
PlanResult optimize(const CostFn& cost, std::size_t dim, const PlanConfig& config,
                    Evaluation evaluation = Evaluation::parallel);

// Rolls the transition model over the trajectory, scores every predicted
// latent with the VAE, and compares the last latent with the goal.
CostBreakdown trajectory_cost(const wm::TransitionModel& model, const vae::NoveltyVae& vae,
                              const wm::RolloutWindow& start, std::span<const float> goal,
                              std::span<const float> actions, double weight);

PlanResult plan(const wm::TransitionModel& model, const vae::NoveltyVae& vae, const wm::RolloutWindow& start,
                std::span<const float> goal, const PlanConfig& config, Evaluation evaluation = Evaluation::parallel);

// iteration,best_total,best_goal,best_novelty,mean_total,mean_shift
void write_diagnostics_csv(std::ostream& os, std::span<const IterationLog> log);

}  // namespace novelplan::plan
