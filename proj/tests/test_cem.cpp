#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "novelplan/chamfer.hpp"
#include "novelplan/error.hpp"
#include "novelplan/mpc.hpp"
#include "oracles.hpp"

using namespace novelplan;
using plan::CostBreakdown;

namespace {

plan::CostFn quadratic(std::vector<float> target) {
  return [target](std::span<const float> a) {
    CostBreakdown c;
    for (std::size_t i = 0; i < a.size(); ++i) c.goal += (a[i] - target[i]) * (a[i] - target[i]);
    c.total = c.goal;
    return c;
  };
}

std::vector<float> random_target(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.8f, 0.8f);
  std::vector<float> t(dim);
  for (auto& v : t) v = u(rng);
  return t;
}

struct Models {
  sim::EnvParams env;
  wm::ObservationCodec codec;
  wm::TransitionModel model;
  vae::NoveltyVae vae;
};

// Untrained but fully wired models: enough to exercise the planning loop.
const Models& models() {
  static const Models m = [] {
    Models out;
    out.env.grid = 16;
    using nn::Activation;
    out.codec = wm::ObservationCodec(nn::DenseNet(nn::mlp({256, 16, 6}, Activation::tanh, Activation::identity), 1),
                                     nn::DenseNet(nn::mlp({6, 16, 256}, Activation::tanh, Activation::sigmoid), 2),
                                     std::vector<float>(6, 0.0f), std::vector<float>(6, 1.0f), 16);
    wm::TransitionConfig tc;
    tc.hidden = 16;
    out.model = wm::TransitionModel(nn::DenseNet(wm::transition_shapes(6, tc), 3), 6, 1, 1);
    vae::VaeConfig vc;
    vc.bottleneck = 2;
    vc.hidden = 8;
    out.vae = vae::NoveltyVae(nn::DenseNet(vae::encoder_shapes(6, vc), 4), nn::DenseNet(vae::decoder_shapes(6, vc), 5),
                              vc.beta);
    return out;
  }();
  return m;
}

plan::PlanConfig small_plan() {
  plan::PlanConfig c;
  c.samples = 32;
  c.elites = 4;
  c.horizon = 3;
  c.max_iterations = 4;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("validate rejects inconsistent settings") {
  plan::PlanConfig c;
  c.elites = c.samples + 1;
  CHECK_THROWS_AS(plan::validate(c), InputError);
  c = {};
  c.horizon = 0;
  CHECK_THROWS_AS(plan::validate(c), InputError);
  c = {};
  c.weight = -0.1;
  CHECK_THROWS_AS(plan::validate(c), InputError);
  CHECK_NOTHROW(plan::validate(plan::PlanConfig{}));
}

TEST_CASE("refit matches the population moments with the floor applied") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<std::vector<float>> elites(7, std::vector<float>(5));
  for (auto& e : elites)
    for (auto& v : e) v = g(rng);
  for (auto& e : elites) e[3] = 0.25f;  // zero spread: the floor must kick in
  const auto d = plan::refit(elites, 1e-4);
  const auto ref = oracle::elite_moments(elites, 1e-4);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(d.mean[i] == doctest::Approx(ref.mean[i]).epsilon(1e-9));
    CHECK(d.variance[i] == doctest::Approx(ref.variance[i]).epsilon(1e-9));
  }
  CHECK(d.variance[3] == 1e-4);
}

TEST_CASE("refit of an empty elite set is a contract violation") {
  const std::vector<std::vector<float>> none;
  CHECK_THROWS_AS(plan::refit(none), ContractError);
}

TEST_CASE("samples are clipped to the action box") {
  plan::TrajectoryDistribution d;
  d.mean.assign(8, 0.9);
  d.variance.assign(8, 4.0);
  std::mt19937_64 rng(1);
  const auto s = plan::sample_trajectories(d, 100, rng);
  CHECK(s.size() == 800);
  for (float v : s) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("serial and parallel batch evaluation agree") {
  const auto cost = quadratic(random_target(12, 1));
  std::mt19937_64 rng(2);
  plan::TrajectoryDistribution d{std::vector<double>(12, 0.0), std::vector<double>(12, 1.0), 0};
  const auto s = plan::sample_trajectories(d, 64, rng);
  const auto a = plan::evaluate_batch_serial(cost, s, 12);
  const auto b = plan::evaluate_batch_parallel(cost, s, 12);
  for (std::size_t i = 0; i < 64; ++i) CHECK(a[i].total == b[i].total);
}

TEST_CASE("CEM recovers the minimizer of a quadratic") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const auto target = random_target(12, seed);
    plan::PlanConfig c;
    c.horizon = 3;
    c.max_iterations = 50;
    c.convergence = 1e-6;
    c.seed = seed;
    const auto r = plan::optimize(quadratic(target), 12, c);
    CHECK(r.log.size() <= 50);
    for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(r.actions[i] - target[i]) < 0.02);
  }
}

TEST_CASE("the incumbent cost never increases across iterations") {
  const auto r = plan::optimize(quadratic(random_target(8, 3)), 8, small_plan());
  for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].best_total <= r.log[i - 1].best_total);
  CHECK(r.cost.total == r.log.back().best_total);
}

TEST_CASE("CEM is deterministic per seed and independent of the evaluation mode") {
  const auto cost = quadratic(random_target(8, 5));
  const auto a = plan::optimize(cost, 8, small_plan(), plan::Evaluation::serial);
  const auto b = plan::optimize(cost, 8, small_plan(), plan::Evaluation::parallel);
  CHECK(a.actions == b.actions);
  CHECK(a.distribution.mean == b.distribution.mean);
  auto other = small_plan();
  other.seed = 18;
  CHECK_FALSE(plan::optimize(cost, 8, other).actions == a.actions);
}

TEST_CASE("the final elites are the lowest-cost samples of the last iteration") {
  const auto r = plan::optimize(quadratic(random_target(8, 6)), 8, small_plan());
  CHECK(r.last_elites.size() == small_plan().elites);
}

TEST_CASE("a lone elite leaves the variance at the floor") {
  auto c = small_plan();
  c.elites = 1;
  const auto r = plan::optimize(quadratic(random_target(8, 7)), 8, c);
  for (double v : r.distribution.variance) CHECK(v == c.variance_floor);
}

TEST_CASE("trajectory cost is L_g plus weighted novelty of every predicted latent") {
  const auto& m = models();
  const auto start = m.model.initial_window(std::vector<float>(6, 0.1f));
  const std::vector<float> goal(6, 0.5f);
  std::vector<float> actions(3 * 4);
  for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = 0.1f * static_cast<float>(i) - 0.5f;
  const auto c0 = plan::trajectory_cost(m.model, m.vae, start, goal, actions, 0.0);
  const auto c1 = plan::trajectory_cost(m.model, m.vae, start, goal, actions, 0.5);
  const auto roll = m.model.rollout(start, actions);
  CHECK(c0.novelty.size() == 3);
  CHECK(c0.total == c0.goal);
  CHECK(c0.goal == nn::mse(roll.back(), goal));
  for (std::size_t t = 0; t < 3; ++t) CHECK(c0.novelty[t] == m.vae.score(roll[t]));
  CHECK(c1.total == doctest::Approx(c1.goal + 0.5 * c1.novelty_sum()));
}

TEST_CASE("plan with zero weight ignores novelty") {
  const auto& m = models();
  const auto start = m.model.initial_window(std::vector<float>(6, 0.0f));
  const std::vector<float> goal(6, 0.3f);
  auto c = small_plan();
  c.weight = 0.0;
  const auto r = plan::plan(m.model, m.vae, start, goal, c);
  CHECK(r.cost.total == r.cost.goal);
  CHECK(r.actions.size() == 12);
  CHECK_THROWS_AS(plan::plan(m.model, m.vae, start, std::vector<float>(5, 0.0f), c), InputError);
}

TEST_CASE("diagnostics CSV has a header and one row per iteration") {
  const auto r = plan::optimize(quadratic(random_target(8, 8)), 8, small_plan());
  std::ostringstream os;
  plan::write_diagnostics_csv(os, r.log);
  const auto text = os.str();
  CHECK(text.rfind("iteration,best_total,best_goal,best_novelty,mean_total,mean_shift\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == r.log.size() + 1);
}

TEST_CASE("MPC executes the budget and records novelty per executed step") {
  const auto& m = models();
  const auto start = sim::reset(sim::EnvKind::granular, 2, m.env);
  const auto goal_state = sim::step(start, {-0.5f, 0.0f, 0.5f, 0.0f}, m.env);
  const auto goal_img = sim::render(goal_state, m.env);
  plan::MpcConfig mc;
  mc.budget = 4;
  mc.execute_per_replan = 2;
  const auto trace = plan::mpc_run(m.env, m.codec, m.model, m.vae, start, goal_img, small_plan(), mc,
                                   &goal_state.positions);
  CHECK(trace.actions.size() == 4);
  CHECK(trace.states.size() == 5);
  CHECK(trace.plans.size() == 2);
  CHECK(trace.executed_novelty.size() == 4);
  REQUIRE(trace.final_chamfer.has_value());
  CHECK(*trace.final_chamfer == chamfer(trace.states.back().positions, goal_state.positions));
  for (std::size_t t = 0; t < 4; ++t) CHECK(trace.states[t + 1] == sim::step(trace.states[t], trace.actions[t], m.env));
}

TEST_CASE("MPC is reproducible and mode independent") {
  const auto& m = models();
  const auto start = sim::reset(sim::EnvKind::granular, 3, m.env);
  const auto goal_img = sim::render(sim::reset(sim::EnvKind::granular, 4, m.env), m.env);
  const plan::MpcConfig mc{3, 1};
  const auto a = plan::mpc_run(m.env, m.codec, m.model, m.vae, start, goal_img, small_plan(), mc, nullptr,
                               plan::Evaluation::serial);
  const auto b = plan::mpc_run(m.env, m.codec, m.model, m.vae, start, goal_img, small_plan(), mc, nullptr,
                               plan::Evaluation::parallel);
  CHECK(a.actions == b.actions);
  CHECK(a.executed_novelty == b.executed_novelty);
  CHECK_FALSE(a.final_chamfer.has_value());
}

TEST_CASE("MPC rejects a zero budget or an oversize execution chunk") {
  const auto& m = models();
  const auto start = sim::reset(sim::EnvKind::granular, 3, m.env);
  const auto img = sim::render(start, m.env);
  CHECK_THROWS_AS(plan::mpc_run(m.env, m.codec, m.model, m.vae, start, img, small_plan(), {0, 1}), InputError);
  CHECK_THROWS_AS(plan::mpc_run(m.env, m.codec, m.model, m.vae, start, img, small_plan(), {5, 4}), InputError);
}
