#pragma once

#include <optional>
#include <vector>

#include "novelplan/cem.hpp"
#include "novelplan/dataset.hpp"
#include "novelplan/sim.hpp"
#include "novelplan/world_model.hpp"

namespace novelplan::plan {

struct MpcConfig {
  std::size_t budget = 5;              // environment actions executed in total
  std::size_t execute_per_replan = 1;  // model steps executed from each plan
};

struct PlanRecord {
  std::size_t first_action = 0;  // index into MpcTrace::actions
  std::size_t executed = 0;      // environment actions taken from this plan
  CostBreakdown cost;
  std::size_t iterations = 0;
};

struct MpcTrace {
  std::vector<sim::ParticleState> states;  // budget + 1
  std::vector<sim::Action> actions;        // budget
  std::vector<PlanRecord> plans;
  // Predicted novelty of every executed model step, in execution order.
  std::vector<double> executed_novelty;
  std::optional<double> final_chamfer;

  double novelty_mean() const;
};

// Receding-horizon loop: plan from the current observation's latent, execute
// the first `execute_per_replan` model steps in the simulator, re-encode, repeat.
MpcTrace mpc_run(const sim::EnvParams& env, const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                 const vae::NoveltyVae& vae, const sim::ParticleState& initial, const sim::Observation& goal_image,
                 const PlanConfig& config, const MpcConfig& mpc, const data::Cloud* goal_cloud = nullptr,
                 Evaluation evaluation = Evaluation::parallel);

}  // namespace novelplan::plan
