#include "novelplan/cem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::plan {

double CostBreakdown::novelty_sum() const {
  double s = 0.0;
  for (double v : novelty) s += v;
  return s;
}

void validate(const PlanConfig& c) {
  if (c.samples == 0) throw InputError("plan: samples must be positive");
  if (c.elites == 0 || c.elites > c.samples) throw InputError("plan: elites must lie in [1, samples]");
  if (c.horizon == 0) throw InputError("plan: horizon must be at least 1");
  if (c.max_iterations == 0) throw InputError("plan: max_iterations must be at least 1");
  if (!(c.weight >= 0.0)) throw InputError("plan: weight must be non-negative");
  if (!(c.variance_floor > 0.0)) throw InputError("plan: variance floor must be positive");
}

TrajectoryDistribution refit(std::span<const std::vector<float>> elites, double variance_floor) {
  if (elites.empty()) throw ContractError("refit: elite set is empty");
  const std::size_t dim = elites.front().size();
  TrajectoryDistribution d;
  d.mean.assign(dim, 0.0);
  d.variance.assign(dim, 0.0);
  for (const auto& e : elites) {
    if (e.size() != dim) throw InputError("refit: elites have different lengths");
    for (std::size_t i = 0; i < dim; ++i) d.mean[i] += e[i];
  }
  const auto k = static_cast<double>(elites.size());
  for (auto& m : d.mean) m /= k;
  for (const auto& e : elites) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = e[i] - d.mean[i];
      d.variance[i] += diff * diff;
    }
  }
  for (auto& v : d.variance) v = std::max(v / k, variance_floor);
  return d;
}

std::vector<float> sample_trajectories(const TrajectoryDistribution& dist, std::size_t count, std::mt19937_64& rng) {
  const std::size_t dim = dist.mean.size();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> out(count * dim);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double v = dist.mean[i] + std::sqrt(dist.variance[i]) * gauss(rng);
      out[s * dim + i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }
  return out;
}

std::vector<CostBreakdown> evaluate_batch_serial(const CostFn& cost, std::span<const float> samples, std::size_t dim) {
  const std::size_t n = samples.size() / dim;
  std::vector<CostBreakdown> out(n);
  for (std::size_t s = 0; s < n; ++s) out[s] = cost(samples.subspan(s * dim, dim));
  return out;
}

std::vector<CostBreakdown> evaluate_batch_parallel(const CostFn& cost, std::span<const float> samples,
                                                   std::size_t dim) {
  const auto n = static_cast<std::ptrdiff_t>(samples.size() / dim);
  std::vector<CostBreakdown> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    out[us] = cost(samples.subspan(us * dim, dim));
  }
  return out;
}

PlanResult optimize(const CostFn& cost, std::size_t dim, const PlanConfig& config, Evaluation evaluation) {
  validate(config);
  if (dim == 0) throw InputError("plan: trajectory dimension must be positive");
  TrajectoryDistribution dist;
  dist.mean.assign(dim, 0.0);
  dist.variance.assign(dim, 1.0);

  PlanResult result;
  bool have_incumbent = false;
  std::vector<std::size_t> order(config.samples);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    // All draws happen here, before dispatch, so results do not depend on the worker count.
    std::mt19937_64 rng(derive_seed(config.seed, Stream::plan, it));
    const auto samples = sample_trajectories(dist, config.samples, rng);
    const auto costs = evaluation == Evaluation::parallel ? evaluate_batch_parallel(cost, samples, dim)
                                                          : evaluate_batch_serial(cost, samples, dim);

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&costs](std::size_t a, std::size_t b) { return costs[a].total < costs[b].total; });
    const std::size_t best = order.front();
    if (!have_incumbent || costs[best].total < result.cost.total) {
      result.cost = costs[best];
      result.actions.assign(samples.begin() + static_cast<std::ptrdiff_t>(best * dim),
                            samples.begin() + static_cast<std::ptrdiff_t>((best + 1) * dim));
      have_incumbent = true;
    }

    std::vector<std::vector<float>> elites;
    elites.reserve(config.elites);
    result.last_elites.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.elites));
    for (std::size_t e = 0; e < config.elites; ++e) {
      const auto first = samples.begin() + static_cast<std::ptrdiff_t>(order[e] * dim);
      elites.emplace_back(first, first + static_cast<std::ptrdiff_t>(dim));
    }
    auto next = refit(elites, config.variance_floor);
    next.iteration = it + 1;

    double shift = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = next.mean[i] - dist.mean[i];
      shift += d * d;
    }
    shift = std::sqrt(shift);

    double mean_total = 0.0;
    for (const auto& c : costs) mean_total += c.total;
    mean_total /= static_cast<double>(costs.size());

    result.log.push_back({it, result.cost.total, result.cost.goal, result.cost.novelty_sum(), mean_total, shift});
    dist = std::move(next);
    if (shift < config.convergence) break;
  }
  result.distribution = std::move(dist);
  return result;
}

CostBreakdown trajectory_cost(const wm::TransitionModel& model, const vae::NoveltyVae& vae,
                              const wm::RolloutWindow& start, std::span<const float> goal,
                              std::span<const float> actions, double weight) {
  const auto latents = model.rollout(start, actions);
  if (latents.empty()) throw InputError("trajectory_cost: empty trajectory");
  CostBreakdown c;
  c.novelty.reserve(latents.size());
  for (const auto& z : latents) c.novelty.push_back(vae.score(z));
  c.goal = nn::mse(latents.back(), goal);
  c.total = c.goal + weight * c.novelty_sum();
  return c;
}

PlanResult plan(const wm::TransitionModel& model, const vae::NoveltyVae& vae, const wm::RolloutWindow& start,
                std::span<const float> goal, const PlanConfig& config, Evaluation evaluation) {
  if (goal.size() != model.latent_dim()) throw InputError("plan: goal latent has the wrong dimension");
  if (vae.latent_dim() != model.latent_dim()) throw InputError("plan: vae and transition latent dims differ");
  const std::size_t dim = config.horizon * model.step_action_dim();
  const CostFn cost = [&](std::span<const float> actions) {
    return trajectory_cost(model, vae, start, goal, actions, config.weight);
  };
  return optimize(cost, dim, config, evaluation);
}

void write_diagnostics_csv(std::ostream& os, std::span<const IterationLog> log) {
  os << "iteration,best_total,best_goal,best_novelty,mean_total,mean_shift\n";
  char buf[256];
  for (const auto& l : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", l.iteration, l.best_total, l.best_goal,
                  l.best_novelty, l.mean_total, l.mean_shift);
    os << buf;
  }
}

}  // namespace novelplan::plan
