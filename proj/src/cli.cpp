#include "novelplan/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "novelplan/error.hpp"
#include "novelplan/pipeline.hpp"
#include "novelplan/seeding.hpp"

namespace fs = std::filesystem;

namespace novelplan {

namespace {

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> env;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> frames;
  std::optional<std::string> weights;
  std::string data;
  std::string encoder;
  std::string dynamics;
  std::string vae;
  std::size_t scene = 0;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_file, "key = value config file");
  sub->add_option("--set", o.sets, "override one key, key=value (repeatable)");
  sub->add_option("--run-dir", o.run_dir, "output directory (default: runs/<time>-seed<seed>-<command>)");
  sub->add_option("--seed", o.seed, "global seed");
  sub->add_option("--workers", o.workers, "worker threads; results do not depend on it");
}

RunConfig resolve(const Options& o) {
  RunConfig c;
  if (!o.config_file.empty()) apply_config_file(c, o.config_file);
  for (const auto& s : o.sets) apply_assignment(c, s);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.env) set_value(c, "env.kind", *o.env);
  if (o.episodes) c.episodes = *o.episodes;
  if (o.frames) c.frames = *o.frames;
  return c;
}

fs::path make_run_dir(const Options& o, const RunConfig& c, const std::string& command) {
  fs::path dir;
  if (!o.run_dir.empty()) {
    dir = o.run_dir;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const fs::path base = fs::path("runs") / (std::string(stamp) + "-seed" + std::to_string(c.seed) + "-" + command);
    dir = base;
    for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  }
  fs::create_directories(dir);
  return dir;
}

void write_resolved_file(const fs::path& dir, const RunConfig& c) {
  std::ofstream os(dir / "config.resolved.txt");
  write_resolved(os, c);
}

fs::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw InputError(std::string("missing required input ") + flag);
  if (!fs::is_directory(value)) throw LoadError(std::string(flag) + " " + value + " is not a directory");
  return value;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_curve(const fs::path& path, const std::vector<double>& loss) {
  auto os = open_out(path);
  os << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, loss[i]);
    os << buf;
  }
}

// Loads the dataset named by --data and makes the config describe its environment.
data::Dataset load_data(const Options& o, RunConfig& c) {
  auto d = data::load(require_dir(o.data, "--data"));
  adopt_dataset_environment(c, d);
  return d;
}

int cmd_gen_data(const Options& o, RunConfig c, std::ostream& out) {
  const auto dir = make_run_dir(o, c, "gen-data");
  write_resolved_file(dir, c);
  const auto d = generate_dataset(c);
  data::save(d, dir / "data");
  out << "wrote " << d.episodes.size() << " episodes x " << d.frames << " frames to " << (dir / "data").string()
      << '\n';
  return 0;
}

int cmd_train_encoder(const Options& o, RunConfig c, std::ostream& out) {
  const auto d = load_data(o, c);
  const auto dir = make_run_dir(o, c, "train-encoder");
  write_resolved_file(dir, c);
  const auto [train, heldout] = training_split(c, d);
  wm::EncoderReport report;
  const auto codec = train_encoder_stage(c, train, &report);
  codec.save(dir / "encoder");
  write_curve(dir / "encoder_curve.csv", report.curve.epoch_loss);
  const auto held = data::stack_observations(heldout);
  const double mse = wm::reconstruction_mse(codec, held);
  const double base = wm::mean_image_baseline_mse(data::stack_observations(train), held, c.env.grid * c.env.grid);
  auto rep = open_out(dir / "encoder_report.txt");
  rep << "heldout_reconstruction_mse " << mse << "\nmean_image_baseline_mse " << base << '\n';
  out << "encoder: held-out reconstruction mse " << mse << " (mean-image baseline " << base << ")\n";
  return 0;
}

int cmd_train_dynamics(const Options& o, RunConfig c, std::ostream& out) {
  const auto d = load_data(o, c);
  const auto codec = wm::ObservationCodec::load(require_dir(o.encoder, "--encoder"));
  const auto dir = make_run_dir(o, c, "train-dynamics");
  write_resolved_file(dir, c);
  const auto [train, heldout] = training_split(c, d);
  wm::TransitionReport report;
  const auto model = train_dynamics_stage(c, codec, train, heldout, &report);
  model.save(dir / "dynamics", codec);
  write_curve(dir / "dynamics_curve.csv", report.curve.epoch_loss);
  auto rep = open_out(dir / "dynamics_report.txt");
  rep << "heldout_one_step_mse " << report.heldout_mse << "\nidentity_mse " << report.identity_mse << '\n';
  out << "dynamics: held-out one-step mse " << report.heldout_mse << " (identity " << report.identity_mse << ")\n";
  return 0;
}

int cmd_train_vae(const Options& o, RunConfig c, std::ostream& out) {
  const auto d = load_data(o, c);
  const auto codec = wm::ObservationCodec::load(require_dir(o.encoder, "--encoder"));
  const auto dir = make_run_dir(o, c, "train-vae");
  write_resolved_file(dir, c);
  const auto [train, heldout] = training_split(c, d);
  vae::VaeReport report;
  const auto v = train_vae_stage(c, codec, train, &report);
  v.save(dir / "vae");
  auto os = open_out(dir / "vae_curve.csv");
  os << "epoch,total,reconstruction,kl\n";
  char buf[128];
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const auto& e = report.epochs[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", i, e.total, e.reconstruction, e.kl);
    os << buf;
  }
  out << "vae: final loss " << (report.epochs.empty() ? 0.0 : report.epochs.back().total) << '\n';
  return 0;
}

struct Models {
  wm::ObservationCodec codec;
  wm::TransitionModel model;
  vae::NoveltyVae vae;
};

Models load_models(const Options& o) {
  Models m;
  m.codec = wm::ObservationCodec::load(require_dir(o.encoder, "--encoder"));
  m.model = wm::TransitionModel::load(require_dir(o.dynamics, "--dynamics"), &m.codec);
  m.vae = vae::NoveltyVae::load(require_dir(o.vae, "--vae"));
  if (m.vae.latent_dim() != m.codec.latent_dim()) {
    throw ConfigError("--vae was trained on " + std::to_string(m.vae.latent_dim()) + "-d latents but --encoder emits " +
                      std::to_string(m.codec.latent_dim()) + "-d latents");
  }
  return m;
}

int cmd_plan(const Options& o, RunConfig c, std::ostream& out) {
  load_data(o, c);
  const auto m = load_models(o);
  const auto dir = make_run_dir(o, c, "plan");
  write_resolved_file(dir, c);
  auto spec = experiment_spec(c, {c.plan.weight});
  spec.scenes = o.scene + 1;
  const auto scene = eval::make_scene(spec, o.scene);
  auto pc = spec.plan;
  pc.seed = derive_seed(spec.plan.seed, scene.seed);

  // Diagnostics of the first replan, from the scene's initial observation.
  const auto window = m.model.initial_window(m.codec.encode(sim::render(scene.initial, c.env)));
  const auto first = plan::plan(m.model, m.vae, window, m.codec.encode(scene.goal_image), pc);
  auto diag = open_out(dir / "cem_diagnostics.csv");
  plan::write_diagnostics_csv(diag, first.log);

  const auto trace =
      plan::mpc_run(c.env, m.codec, m.model, m.vae, scene.initial, scene.goal_image, pc, c.mpc, &scene.goal_cloud);
  auto os = open_out(dir / "trace.csv");
  os << "step,start_x,start_y,end_x,end_y\n";
  char buf[160];
  for (std::size_t i = 0; i < trace.actions.size(); ++i) {
    const auto& a = trace.actions[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", i, a[0], a[1], a[2], a[3]);
    os << buf;
  }
  auto sum = open_out(dir / "plan_summary.txt");
  std::snprintf(buf, sizeof buf, "scene_seed %llu\nweight %.9g\nchamfer_final %.9g\nnovelty_mean %.9g\n",
                static_cast<unsigned long long>(scene.seed), pc.weight, *trace.final_chamfer, trace.novelty_mean());
  sum << buf;
  out << buf;
  return 0;
}

int cmd_eval(const Options& o, RunConfig c, std::ostream& out, bool sweep) {
  if (o.weights) set_value(c, sweep ? "eval.sweep_weights" : "eval.weights", *o.weights);
  load_data(o, c);
  const auto m = load_models(o);
  const auto dir = make_run_dir(o, c, sweep ? "sweep" : "eval");
  write_resolved_file(dir, c);
  const auto spec = experiment_spec(c, sweep ? c.sweep_weights : c.eval_weights);
  const auto result = eval::evaluate(spec, m.codec, m.model, m.vae);
  {
    auto os = open_out(dir / "results.csv");
    eval::write_results_csv(os, result.rows, c.record_seconds);
  }
  {
    auto os = open_out(dir / "timings.csv");
    eval::write_timings_csv(os, result.rows);
  }
  auto os = open_out(dir / "summary.txt");
  eval::write_summary(os, result.summary);
  eval::write_summary(out, result.summary);
  out << "wrote " << result.rows.size() << " rows to " << (dir / "results.csv").string() << '\n';
  return 0;
}

int cmd_ood(const Options& o, RunConfig c, std::ostream& out) {
  const auto d = load_data(o, c);
  const auto codec = wm::ObservationCodec::load(require_dir(o.encoder, "--encoder"));
  const auto v = vae::NoveltyVae::load(require_dir(o.vae, "--vae"));
  const auto dir = make_run_dir(o, c, "ood-report");
  write_resolved_file(dir, c);
  const auto [train, heldout] = training_split(c, d);
  const auto sets = ood_latents(c, codec, heldout);
  const auto report = eval::ood_report(v, sets.in_distribution, sets.out_of_distribution, c.histogram_bins);
  {
    auto os = open_out(dir / "ood_histogram.csv");
    eval::write_histogram_csv(os, report);
  }
  auto os = open_out(dir / "ood_summary.txt");
  eval::write_ood_summary(os, report);
  eval::write_ood_summary(out, report);
  return 0;
}

int cmd_strip(const Options& o, RunConfig c, std::ostream& out) {
  const auto d = load_data(o, c);
  const auto codec = wm::ObservationCodec::load(require_dir(o.encoder, "--encoder"));
  const auto model = wm::TransitionModel::load(require_dir(o.dynamics, "--dynamics"), &codec);
  const auto dir = make_run_dir(o, c, "strip");
  write_resolved_file(dir, c);
  const auto [train, heldout] = training_split(c, d);
  if (c.strip_episode >= heldout.episodes.size()) {
    throw InputError("eval.strip_episode " + std::to_string(c.strip_episode) + " is past the " +
                     std::to_string(heldout.episodes.size()) + " held-out episodes");
  }
  const auto img = eval::rollout_strip(codec, model, heldout.episodes[c.strip_episode]);
  write_pfm(img, dir / "strip.pfm");
  write_pgm(img, dir / "strip.pgm");
  out << "wrote " << img.width << "x" << img.height << " strip to " << (dir / "strip.pgm").string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"novelty-guarded latent planning"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "simulate a random-action dataset");
  auto* enc = app.add_subcommand("train-encoder", "train the observation autoencoder");
  auto* dyn = app.add_subcommand("train-dynamics", "train the latent transition model");
  auto* vae_cmd = app.add_subcommand("train-vae", "train the latent novelty VAE");
  auto* plan_cmd = app.add_subcommand("plan", "run MPC on one scene");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate scenes at the eval weights");
  auto* sweep = app.add_subcommand("sweep", "evaluate scenes across the sweep weights");
  auto* ood = app.add_subcommand("ood-report", "novelty score separation on gap-only episodes");
  auto* strip = app.add_subcommand("strip", "actual vs predicted rollout image");
  for (auto* s : {gen, enc, dyn, vae_cmd, plan_cmd, eval_cmd, sweep, ood, strip}) {
    add_common(s, o);
    s->add_option("--env", o.env, "granular or rope");
  }
  gen->add_option("--episodes", o.episodes, "episodes to simulate");
  gen->add_option("--frames", o.frames, "actions per episode");
  for (auto* s : {enc, dyn, vae_cmd, plan_cmd, eval_cmd, sweep, ood, strip}) {
    s->add_option("--data", o.data, "dataset directory")->required();
  }
  for (auto* s : {dyn, vae_cmd, plan_cmd, eval_cmd, sweep, ood, strip}) {
    s->add_option("--encoder", o.encoder, "encoder directory")->required();
  }
  for (auto* s : {plan_cmd, eval_cmd, sweep, strip}) {
    s->add_option("--dynamics", o.dynamics, "transition model directory")->required();
  }
  for (auto* s : {plan_cmd, eval_cmd, sweep, ood}) s->add_option("--vae", o.vae, "novelty VAE directory")->required();
  for (auto* s : {eval_cmd, sweep}) s->add_option("--weights", o.weights, "comma-separated novelty weights");
  plan_cmd->add_option("--scene", o.scene, "scene index");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "novelplan: " << e.what() << '\n';
    return 2;
  }

  try {
    RunConfig c = resolve(o);
    if (c.workers > 0) omp_set_num_threads(static_cast<int>(c.workers));
    if (*gen) return cmd_gen_data(o, c, out);
    if (*enc) return cmd_train_encoder(o, c, out);
    if (*dyn) return cmd_train_dynamics(o, c, out);
    if (*vae_cmd) return cmd_train_vae(o, c, out);
    if (*plan_cmd) return cmd_plan(o, c, out);
    if (*eval_cmd) return cmd_eval(o, c, out, false);
    if (*sweep) return cmd_eval(o, c, out, true);
    if (*ood) return cmd_ood(o, c, out);
    if (*strip) return cmd_strip(o, c, out);
  } catch (const std::exception& e) {
    err << "novelplan: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace novelplan
