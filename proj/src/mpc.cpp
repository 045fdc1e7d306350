#include "novelplan/mpc.hpp"

#include <algorithm>

#include "novelplan/chamfer.hpp"
#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::plan {

double MpcTrace::novelty_mean() const {
  if (executed_novelty.empty()) return 0.0;
  double s = 0.0;
  for (double v : executed_novelty) s += v;
  return s / static_cast<double>(executed_novelty.size());
}

MpcTrace mpc_run(const sim::EnvParams& env, const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                 const vae::NoveltyVae& vae, const sim::ParticleState& initial, const sim::Observation& goal_image,
                 const PlanConfig& config, const MpcConfig& mpc, const data::Cloud* goal_cloud,
                 Evaluation evaluation) {
  validate(config);
  if (mpc.budget == 0) throw InputError("mpc: action budget must be positive");
  if (mpc.execute_per_replan == 0 || mpc.execute_per_replan > config.horizon) {
    throw InputError("mpc: execute_per_replan must lie in [1, horizon]");
  }
  const std::size_t d = model.latent_dim();
  const std::size_t f = model.frame_skip();
  const std::size_t h = model.window();
  const std::size_t chunk = model.step_action_dim();
  const auto goal = codec.encode(goal_image);

  MpcTrace trace;
  sim::ParticleState state = initial;
  trace.states.push_back(state);

  wm::RolloutWindow window = model.initial_window(codec.encode(sim::render(state, env)));
  std::size_t replan = 0;
  while (trace.actions.size() < mpc.budget) {
    PlanConfig pc = config;
    pc.seed = derive_seed(config.seed, replan);
    const auto result = plan(model, vae, window, goal, pc, evaluation);

    const std::size_t remaining = mpc.budget - trace.actions.size();
    const std::size_t take = std::min(mpc.execute_per_replan * f, remaining);
    PlanRecord record{trace.actions.size(), take, result.cost, result.log.size()};
    for (std::size_t j = 0; j < take; ++j) {
      sim::Action a{};
      std::copy_n(result.actions.begin() + static_cast<std::ptrdiff_t>(j * sim::action_dim), sim::action_dim, a.begin());
      state = sim::step(state, a, env);
      trace.actions.push_back(a);
      trace.states.push_back(state);
      // Completed model step: record its predicted novelty and slide the window.
      if ((j + 1) % f == 0) {
        const std::size_t model_step = j / f;
        trace.executed_novelty.push_back(result.cost.novelty.at(model_step));
        const auto z = codec.encode(sim::render(state, env));
        window.latents.erase(window.latents.begin(), window.latents.begin() + static_cast<std::ptrdiff_t>(d));
        window.latents.insert(window.latents.end(), z.begin(), z.end());
        if (h > 1) {
          window.past_actions.erase(window.past_actions.begin(),
                                    window.past_actions.begin() + static_cast<std::ptrdiff_t>(chunk));
          const auto first = result.actions.begin() + static_cast<std::ptrdiff_t>(model_step * chunk);
          window.past_actions.insert(window.past_actions.end(), first, first + static_cast<std::ptrdiff_t>(chunk));
        }
      }
    }
    trace.plans.push_back(std::move(record));
    ++replan;
  }
  if (goal_cloud) trace.final_chamfer = chamfer(state.positions, *goal_cloud);
  return trace;
}

}  // namespace novelplan::plan
