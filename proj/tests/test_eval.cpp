#include <cmath>
#include <sstream>

#include "doctest.h"
#include "novelplan/chamfer.hpp"
#include "novelplan/error.hpp"
#include "novelplan/eval.hpp"

using namespace novelplan;

namespace {

struct Models {
  wm::ObservationCodec codec;
  wm::TransitionModel model;
  vae::NoveltyVae vae;
};

const Models& models() {
  static const Models m = [] {
    Models out;
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

eval::ExperimentSpec small_spec() {
  eval::ExperimentSpec s;
  s.env.grid = 16;
  s.weights = {0.0, 0.5};
  s.scenes = 3;
  s.plan.samples = 16;
  s.plan.elites = 4;
  s.plan.horizon = 2;
  s.plan.max_iterations = 2;
  s.mpc.budget = 2;
  return s;
}

}  // namespace

TEST_CASE("reference weight grid") {
  CHECK(eval::reference_weight_grid() == std::vector<double>{0.0, 0.125, 0.25, 0.375, 0.5});
}

TEST_CASE("scenes are deterministic and their goals move the particles") {
  const auto spec = small_spec();
  for (std::size_t i = 0; i < 5; ++i) {
    const auto a = eval::make_scene(spec, i);
    const auto b = eval::make_scene(spec, i);
    CHECK(a.seed == b.seed);
    CHECK(a.initial == b.initial);
    CHECK(a.goal_cloud == b.goal_cloud);
    CHECK(chamfer(a.initial.positions, a.goal_cloud) >= spec.min_goal_chamfer);
    CHECK(a.goal_image == sim::render({a.initial.kind, a.initial.particle_radius, a.goal_cloud}, spec.env));
  }
  CHECK_FALSE(eval::make_scene(spec, 0).initial == eval::make_scene(spec, 1).initial);
}

TEST_CASE("a goal threshold no draw can meet is reported") {
  auto spec = small_spec();
  spec.min_goal_chamfer = 10.0;
  CHECK_THROWS_AS(eval::make_scene(spec, 0), InputError);
}

TEST_CASE("evaluation rows are ordered by weight then scene and independent of the job mode") {
  const auto spec = small_spec();
  const auto& m = models();
  const auto a = eval::evaluate(spec, m.codec, m.model, m.vae, plan::Evaluation::serial);
  const auto b = eval::evaluate(spec, m.codec, m.model, m.vae, plan::Evaluation::parallel);
  REQUIRE(a.rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.rows[i].w == spec.weights[i / 3]);
    CHECK(a.rows[i].seed == eval::make_scene(spec, i % 3).seed);
    CHECK(a.rows[i].env == "granular");
    CHECK(a.rows[i].chamfer_final == b.rows[i].chamfer_final);
    CHECK(a.rows[i].novelty_mean == b.rows[i].novelty_mean);
  }
  std::ostringstream sa, sb;
  eval::write_results_csv(sa, a.rows);
  eval::write_results_csv(sb, b.rows);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("summary mean and sample standard deviation") {
  std::vector<eval::ResultRow> rows{{"granular", 0.0, 1, 1.0, 0.5, 0}, {"granular", 0.0, 2, 3.0, 1.5, 0},
                                    {"granular", 0.25, 1, 2.0, 0.1, 0}};
  const auto s = eval::summarize(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].count == 2);
  CHECK(s[0].chamfer_mean == 2.0);
  CHECK(s[0].chamfer_std == doctest::Approx(std::sqrt(2.0)));
  CHECK(s[0].novelty_mean == 1.0);
  CHECK(s[1].chamfer_std == 0.0);
}

TEST_CASE("results CSV round trips and has a fixed header") {
  std::vector<eval::ResultRow> rows{{"rope", 0.125, 42, 0.0123456789, 0.987654321, 1.5}};
  std::ostringstream os;
  eval::write_results_csv(os, rows, true);
  CHECK(os.str().rfind("env,w,seed,chamfer_final,novelty_mean,seconds\n", 0) == 0);
  std::istringstream is(os.str());
  const auto back = eval::read_results_csv(is);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == rows[0]);
  std::ostringstream quiet;
  eval::write_results_csv(quiet, rows);
  std::istringstream qs(quiet.str());
  CHECK(eval::read_results_csv(qs)[0].seconds == 0.0);
}

TEST_CASE("median of odd and even samples") {
  CHECK(eval::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(eval::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("OOD report ratio and histogram counts") {
  const std::vector<double> id{1.0, 2.0, 3.0}, ood{4.0, 6.0, 8.0, 10.0};
  const auto r = eval::ood_report_from_scores(id, ood, 4);
  CHECK(r.median_id == 2.0);
  CHECK(r.median_ood == 7.0);
  CHECK(r.ratio == 3.5);
  CHECK(r.bins.size() == 4);
  std::size_t ni = 0, no = 0;
  for (const auto& b : r.bins) {
    ni += b.id_count;
    no += b.ood_count;
  }
  CHECK(ni == 3);
  CHECK(no == 4);
}

TEST_CASE("rollout strip is two rows of frames plus the goal") {
  const auto ep = data::generate_episode(sim::EnvKind::granular, {}, 4, 3, small_spec().env);
  const auto img = eval::rollout_strip(models().codec, models().model, ep);
  CHECK(img.height == 2 * 16);
  CHECK(img.width == 5 * 16);
}
