#include "novelplan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(value) + "' is not " + std::string(want));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v, bool allow_inf = false) {
  v = trim(v);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty() || std::isnan(out) ||
      (!allow_inf && std::isinf(out))) {
    bad_value(key, v, allow_inf ? "a number" : "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<double> parse_list(std::string_view key, std::string_view v, bool allow_inf = false) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto cell = v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_double(key, cell, allow_inf));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Field>
Entry size_entry(std::string name, std::string doc, Field field) {
  auto n = name;
  return {{std::move(name), std::move(doc)},
          [field, n](RunConfig& c, std::string_view v) { field(c) = static_cast<std::size_t>(parse_u64(n, v)); },
          [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <class Field>
Entry double_entry(std::string name, std::string doc, Field field) {
  auto n = name;
  return {{std::move(name), std::move(doc)},
          [field, n](RunConfig& c, std::string_view v) { field(c) = parse_double(n, v); },
          [field](const RunConfig& c) { return fmt(field(c)); }};
}

template <class Field>
Entry bool_entry(std::string name, std::string doc, Field field) {
  auto n = name;
  return {{std::move(name), std::move(doc)},
          [field, n](RunConfig& c, std::string_view v) { field(c) = parse_bool(n, v); },
          [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); }};
}

template <class Field>
Entry list_entry(std::string name, std::string doc, Field field) {
  auto n = name;
  return {{std::move(name), std::move(doc)},
          [field, n](RunConfig& c, std::string_view v) { field(c) = parse_list(n, v); },
          [field](const RunConfig& c) { return fmt_list(field(c)); }};
}

template <class Field>
Entry box_entry(std::string name, std::string doc, Field field) {
  auto n = name;
  return {{std::move(name), std::move(doc)},
          [field, n](RunConfig& c, std::string_view v) {
            const auto vals = parse_list(n, v, true);
            if (vals.size() != 4) bad_value(n, v, "four comma-separated numbers");
            auto& box = field(c);
            for (std::size_t i = 0; i < 4; ++i) box[i] = static_cast<float>(vals[i]);
          },
          [field](const RunConfig& c) {
            const auto& box = field(c);
            return fmt_list({box[0], box[1], box[2], box[3]});
          }};
}

#define NP_FIELD(expr) [](auto& c) -> auto& { return expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back({{"seed", "global seed; data, training, planning and split seeds derive from it"},
                 [](RunConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back(size_entry("workers", "OpenMP threads, 0 for the runtime default; never changes results",
                           NP_FIELD(c.workers)));

    t.push_back({{"env.kind", "granular or rope"},
                 [](RunConfig& c, std::string_view v) {
                   try {
                     c.env_kind = sim::parse_env_kind(trim(v));
                   } catch (const InputError&) {
                     bad_value("env.kind", v, "granular or rope");
                   }
                 },
                 [](const RunConfig& c) { return std::string(sim::to_string(c.env_kind)); }});
    t.push_back(size_entry("env.substeps", "pusher sweep substeps per action", NP_FIELD(c.env.substeps)));
    t.push_back(double_entry("env.pusher_radius", "pusher disk radius", NP_FIELD(c.env.pusher_radius)));
    t.push_back(double_entry("env.particle_radius", "particle contact radius", NP_FIELD(c.env.particle_radius)));
    t.push_back(double_entry("env.rope_rest_length", "rope link rest length", NP_FIELD(c.env.rope_rest_length)));
    t.push_back(size_entry("env.constraint_passes", "rope link projection passes per substep",
                           NP_FIELD(c.env.constraint_passes)));
    t.push_back(size_entry("env.granular_particles", "particles in a granular scene", NP_FIELD(c.env.granular_particles)));
    t.push_back(size_entry("env.rope_particles", "particles in a rope", NP_FIELD(c.env.rope_particles)));
    t.push_back(double_entry("env.granular_disk_radius", "radius of the initial granular pile",
                             NP_FIELD(c.env.granular_disk_radius)));
    t.push_back(size_entry("env.grid", "observation side length in pixels", NP_FIELD(c.env.grid)));
    t.push_back(double_entry("env.render_radius", "particle splat radius in the observation",
                             NP_FIELD(c.env.render_radius)));

    t.push_back({{"data.policy", "uniform or gapped"},
                 [](RunConfig& c, std::string_view v) {
                   try {
                     c.policy.kind = data::parse_policy_kind(trim(v));
                   } catch (const InputError&) {
                     bad_value("data.policy", v, "uniform or gapped");
                   }
                 },
                 [](const RunConfig& c) { return std::string(data::to_string(c.policy.kind)); }});
    t.push_back(box_entry("data.gap_lo", "lower corner of the excluded action box", NP_FIELD(c.policy.gap.lo)));
    t.push_back(box_entry("data.gap_hi", "upper corner of the excluded action box", NP_FIELD(c.policy.gap.hi)));
    t.push_back(size_entry("data.episodes", "episodes to simulate; 0 picks 100 for granular, 1000 for rope", NP_FIELD(c.episodes)));
    t.push_back(size_entry("data.frames", "actions per episode", NP_FIELD(c.frames)));
    t.push_back(double_entry("data.validation_fraction", "held-out share of episodes",
                             NP_FIELD(c.validation_fraction)));
    t.push_back(size_entry("data.probe_episodes", "gap-only episodes for the novelty report",
                           NP_FIELD(c.probe_episodes)));

    t.push_back({{"encoder.corpus", "uniform (separate uniform-policy episodes) or dataset (the training episodes)"},
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v != "uniform" && v != "dataset") bad_value("encoder.corpus", v, "uniform or dataset");
                   c.encoder_corpus = std::string(v);
                 },
                 [](const RunConfig& c) { return c.encoder_corpus; }});
    t.push_back(size_entry("encoder.corpus_episodes", "episodes in the uniform pretraining corpus",
                           NP_FIELD(c.encoder_corpus_episodes)));
    t.push_back(size_entry("encoder.latent_dim", "latent size D", NP_FIELD(c.encoder.latent_dim)));
    t.push_back(size_entry("encoder.hidden", "autoencoder hidden width", NP_FIELD(c.encoder.hidden)));
    t.push_back(size_entry("encoder.epochs", "autoencoder epochs", NP_FIELD(c.encoder.epochs)));
    t.push_back(size_entry("encoder.batch", "autoencoder minibatch", NP_FIELD(c.encoder.batch)));
    t.push_back(double_entry("encoder.lr", "autoencoder Adam step size", NP_FIELD(c.encoder.learning_rate)));

    t.push_back(size_entry("dynamics.window", "history length H", NP_FIELD(c.dynamics.window)));
    t.push_back(size_entry("dynamics.frame_skip", "actions per model step F", NP_FIELD(c.dynamics.frame_skip)));
    t.push_back(size_entry("dynamics.hidden", "transition hidden width", NP_FIELD(c.dynamics.hidden)));
    t.push_back(size_entry("dynamics.epochs", "transition epochs", NP_FIELD(c.dynamics.epochs)));
    t.push_back(size_entry("dynamics.batch", "transition minibatch", NP_FIELD(c.dynamics.batch)));
    t.push_back(double_entry("dynamics.lr", "transition Adam step size", NP_FIELD(c.dynamics.learning_rate)));
    t.push_back(bool_entry("dynamics.dropout", "input dropout while training", NP_FIELD(c.dynamics.dropout)));
    t.push_back(double_entry("dynamics.validation_fraction", "share of training episodes used to pick the epoch",
                             NP_FIELD(c.dynamics.validation_fraction)));
    t.push_back(double_entry("dynamics.dropout_rate", "input dropout probability", NP_FIELD(c.dynamics.dropout_rate)));

    t.push_back(size_entry("vae.bottleneck", "VAE code size M", NP_FIELD(c.vae.bottleneck)));
    t.push_back(size_entry("vae.hidden", "VAE hidden width", NP_FIELD(c.vae.hidden)));
    t.push_back(double_entry("vae.beta", "KL weight", NP_FIELD(c.vae.beta)));
    t.push_back(double_entry("vae.validation_fraction", "share of training latents used to pick the epoch",
                             NP_FIELD(c.vae.validation_fraction)));
    t.push_back(size_entry("vae.epochs", "VAE epochs", NP_FIELD(c.vae.epochs)));
    t.push_back(size_entry("vae.batch", "VAE minibatch", NP_FIELD(c.vae.batch)));
    t.push_back(double_entry("vae.lr", "VAE Adam step size", NP_FIELD(c.vae.learning_rate)));

    t.push_back(size_entry("plan.samples", "CEM samples per iteration", NP_FIELD(c.plan.samples)));
    t.push_back(size_entry("plan.elites", "CEM elites", NP_FIELD(c.plan.elites)));
    t.push_back(size_entry("plan.horizon", "model steps per plan", NP_FIELD(c.plan.horizon)));
    t.push_back(double_entry("plan.weight", "novelty weight w for the plan subcommand", NP_FIELD(c.plan.weight)));
    t.push_back(size_entry("plan.max_iterations", "CEM iteration cap", NP_FIELD(c.plan.max_iterations)));
    t.push_back(double_entry("plan.convergence", "stop when the mean moves less than this", NP_FIELD(c.plan.convergence)));
    t.push_back(double_entry("plan.variance_floor", "lower bound on CEM variance", NP_FIELD(c.plan.variance_floor)));

    t.push_back(list_entry("eval.weights", "novelty weights for eval", NP_FIELD(c.eval_weights)));
    t.push_back(list_entry("eval.sweep_weights", "novelty weights for sweep", NP_FIELD(c.sweep_weights)));
    t.push_back(size_entry("eval.scenes", "evaluation scenes", NP_FIELD(c.scenes)));
    t.push_back({{"eval.scene_seed", "seed of the evaluation scenes"},
                 [](RunConfig& c, std::string_view v) { c.scene_seed = parse_u64("eval.scene_seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.scene_seed); }});
    t.push_back(size_entry("eval.goal_actions", "random actions from a scene's start to its goal",
                           NP_FIELD(c.goal_actions)));
    t.push_back(double_entry("eval.min_goal_chamfer", "goals closer than this to the start are redrawn",
                             NP_FIELD(c.min_goal_chamfer)));
    t.push_back(size_entry("eval.budget", "environment actions per episode", NP_FIELD(c.mpc.budget)));
    t.push_back(size_entry("eval.execute_per_replan", "model steps executed before replanning",
                           NP_FIELD(c.mpc.execute_per_replan)));
    t.push_back(bool_entry("eval.record_seconds", "write wall-clock time into results.csv",
                           NP_FIELD(c.record_seconds)));
    t.push_back(size_entry("eval.histogram_bins", "bins of the novelty histogram", NP_FIELD(c.histogram_bins)));
    t.push_back(size_entry("eval.strip_episode", "held-out episode drawn by strip", NP_FIELD(c.strip_episode)));
    std::sort(t.begin(), t.end(), [](const Entry& a, const Entry& b) { return a.key.name < b.key.name; });
    return t;
  }();
  return table;
}

#undef NP_FIELD

const Entry& find_entry(std::string_view key) {
  const auto& t = entries();
  const auto it = std::find_if(t.begin(), t.end(), [&](const Entry& e) { return e.key.name == key; });
  if (it == t.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  return *it;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_entry(trim(key)).set(config, trim(value));
}

std::string get_value(const RunConfig& config, std::string_view key) { return find_entry(trim(key)).get(config); }

void apply_assignment(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config: expected key=value, got '" + std::string(assignment) + "'");
  }
  set_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void apply_config_text(RunConfig& config, std::istream& is, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    try {
      apply_assignment(config, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  apply_config_text(config, is, path.string());
}

void write_resolved(std::ostream& os, const RunConfig& config) {
  for (const auto& e : entries()) os << e.key.name << " = " << e.get(config) << '\n';
}

wm::EncoderConfig encoder_config(const RunConfig& c) {
  auto e = c.encoder;
  e.seed = derive_seed(c.seed, Stream::train, 1);
  return e;
}

wm::TransitionConfig dynamics_config(const RunConfig& c) {
  auto d = c.dynamics;
  d.seed = derive_seed(c.seed, Stream::train, 2);
  return d;
}

vae::VaeConfig vae_config(const RunConfig& c) {
  auto v = c.vae;
  v.seed = derive_seed(c.seed, Stream::train, 3);
  return v;
}

plan::PlanConfig plan_config(const RunConfig& c) {
  auto p = c.plan;
  p.seed = derive_seed(c.seed, Stream::plan, 0);
  return p;
}

eval::ExperimentSpec experiment_spec(const RunConfig& c, const std::vector<double>& weights) {
  eval::ExperimentSpec s;
  s.kind = c.env_kind;
  s.env = c.env;
  s.goal_policy = c.policy;
  s.weights = weights;
  s.scenes = c.scenes;
  s.scene_seed = c.scene_seed;
  s.goal_actions = c.goal_actions;
  s.min_goal_chamfer = c.min_goal_chamfer;
  s.plan = plan_config(c);
  s.mpc = c.mpc;
  return s;
}

std::uint64_t split_seed(const RunConfig& c) { return derive_seed(c.seed, Stream::split, 0); }
std::uint64_t probe_seed(const RunConfig& c) { return derive_seed(c.seed, Stream::probe, 0); }
std::uint64_t corpus_seed(const RunConfig& c) { return derive_seed(c.seed, Stream::corpus, 0); }

}  // namespace novelplan
