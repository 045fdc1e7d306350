#include "novelplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "novelplan/checkpoint.hpp"
#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::data {

std::string_view to_string(PolicyKind kind) { return kind == PolicyKind::uniform ? "uniform" : "gapped"; }

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "uniform") return PolicyKind::uniform;
  if (name == "gapped") return PolicyKind::gapped;
  throw InputError("unknown policy '" + std::string(name) + "' (expected uniform or gapped)");
}

bool GapRegion::contains(const sim::Action& a) const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(a[i] > lo[i] && a[i] < hi[i])) return false;
  }
  return true;
}

GapRegion GapRegion::start_x_positive() {
  constexpr float inf = std::numeric_limits<float>::infinity();
  return {{0.0f, -inf, -inf, -inf}, {inf, inf, inf, inf}};
}

namespace {

sim::Action uniform_action(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  sim::Action a{};
  for (auto& v : a) v = dist(rng);
  return a;
}

template <typename Sampler>
Episode roll_episode(sim::EnvKind kind, std::size_t frames, std::uint64_t seed, const sim::EnvParams& params,
                     Sampler&& sampler) {
  Episode ep;
  ep.seed = seed;
  std::mt19937_64 rng(derive_seed(seed, Stream::episode, 0));
  auto state = sim::reset(kind, derive_seed(seed, Stream::init, 0), params);
  ep.observations.push_back(sim::render(state, params));
  ep.clouds.push_back(state.positions);
  for (std::size_t t = 0; t < frames; ++t) {
    const sim::Action a = sampler(rng);
    state = sim::step(state, a, params);
    ep.actions.push_back(a);
    ep.observations.push_back(sim::render(state, params));
    ep.clouds.push_back(state.positions);
  }
  return ep;
}

void check_generate_args(std::size_t episodes, std::size_t frames) {
  if (episodes < 1) throw InputError("generate: need at least one episode");
  if (frames < 2) throw InputError("generate: need at least two frames per episode");
}

}  // namespace

sim::Action sample_action(const PolicySpec& policy, std::mt19937_64& rng) {
  for (;;) {
    const sim::Action a = uniform_action(rng);
    if (policy.kind == PolicyKind::uniform || !policy.gap.contains(a)) return a;
  }
}

sim::Action sample_gap_action(const GapRegion& gap, std::mt19937_64& rng) {
  sim::Action a{};
  for (std::size_t i = 0; i < 4; ++i) {
    const float lo = std::max(gap.lo[i], -1.0f);
    const float hi = std::min(gap.hi[i], 1.0f);
    if (!(lo < hi)) throw InputError("gap region does not intersect the action box");
    std::uniform_real_distribution<float> dist(lo, hi);
    do {
      a[i] = dist(rng);
    } while (!(a[i] > gap.lo[i] && a[i] < gap.hi[i]));
  }
  return a;
}

std::uint64_t episode_seed(std::uint64_t dataset_seed, std::size_t index) { return derive_seed(dataset_seed, index); }

Episode generate_episode(sim::EnvKind kind, const PolicySpec& policy, std::size_t frames, std::uint64_t seed,
                         const sim::EnvParams& params) {
  return roll_episode(kind, frames, seed, params, [&policy](std::mt19937_64& rng) { return sample_action(policy, rng); });
}

Dataset generate_serial(sim::EnvKind kind, const PolicySpec& policy, std::size_t episodes, std::size_t frames,
                        std::uint64_t seed, const sim::EnvParams& params) {
  check_generate_args(episodes, frames);
  Dataset d{kind, params, policy, seed, frames, {}};
  d.episodes.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    d.episodes.push_back(generate_episode(kind, policy, frames, episode_seed(seed, i), params));
  }
  return d;
}

std::size_t default_episodes(sim::EnvKind kind) { return kind == sim::EnvKind::rope ? 1000 : 100; }

Dataset generate(sim::EnvKind kind, const PolicySpec& policy, std::size_t episodes, std::size_t frames,
                 std::uint64_t seed, const sim::EnvParams& params) {
  check_generate_args(episodes, frames);
  Dataset d{kind, params, policy, seed, frames, {}};
  d.episodes.resize(episodes);
  const auto n = static_cast<std::ptrdiff_t>(episodes);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    d.episodes[ui] = generate_episode(kind, policy, frames, episode_seed(seed, ui), params);
  }
  return d;
}

Dataset generate_gap_probe(sim::EnvKind kind, const GapRegion& gap, std::size_t episodes, std::size_t frames,
                           std::uint64_t seed, const sim::EnvParams& params) {
  if (episodes < 1 || frames < 1) throw InputError("gap probe needs at least one episode and one frame");
  Dataset d{kind, params, PolicySpec{PolicyKind::gapped, gap}, seed, frames, {}};
  d.episodes.resize(episodes);
  const auto n = static_cast<std::ptrdiff_t>(episodes);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    d.episodes[ui] = roll_episode(kind, frames, derive_seed(seed, Stream::probe, ui), params,
                                  [&gap](std::mt19937_64& rng) { return sample_gap_action(gap, rng); });
  }
  return d;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& key, const std::filesystem::path& origin) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw LoadError(origin.string() + ": key '" + key + "' is not a number: " + s);
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key, const std::filesystem::path& origin) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw LoadError(origin.string() + ": key '" + key + "' is not an integer: " + s);
  return v;
}

std::array<float, 4> parse_box(const std::string& s, const std::string& key, const std::filesystem::path& origin) {
  const auto v = split_floats(s);
  if (v.size() != 4) throw LoadError(origin.string() + ": key '" + key + "' needs 4 values");
  return {v[0], v[1], v[2], v[3]};
}

std::size_t particle_count(const Dataset& d) {
  return d.kind == sim::EnvKind::granular ? d.params.granular_particles : d.params.rope_particles;
}

}  // namespace

void save(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t g = d.params.grid;
  const std::size_t k = particle_count(d);
  std::vector<float> obs;
  std::vector<float> acts;
  std::vector<float> clouds;
  obs.reserve(d.observation_count() * g * g);
  std::string seeds;
  for (const auto& ep : d.episodes) {
    if (ep.observations.size() != d.frames + 1 || ep.actions.size() != d.frames || ep.clouds.size() != d.frames + 1) {
      throw InputError("save: episode length does not match dataset frame count");
    }
    for (const auto& o : ep.observations) obs.insert(obs.end(), o.pixels.begin(), o.pixels.end());
    for (const auto& a : ep.actions) acts.insert(acts.end(), a.begin(), a.end());
    for (const auto& c : ep.clouds) {
      if (c.size() != k) throw InputError("save: cloud size does not match particle count");
      for (const auto& p : c) {
        clouds.push_back(p.x);
        clouds.push_back(p.y);
      }
    }
    if (!seeds.empty()) seeds += ',';
    seeds += std::to_string(ep.seed);
  }

  KeyValues kv;
  kv["format_version"] = std::to_string(dataset_format_version);
  kv["env"] = std::string(sim::to_string(d.kind));
  kv["episodes"] = std::to_string(d.episodes.size());
  kv["frames"] = std::to_string(d.frames);
  kv["grid"] = std::to_string(g);
  kv["particles"] = std::to_string(k);
  kv["seed"] = std::to_string(d.seed);
  kv["policy"] = std::string(to_string(d.policy.kind));
  kv["gap_lo"] = join_floats(d.policy.gap.lo);
  kv["gap_hi"] = join_floats(d.policy.gap.hi);
  kv["episode_seeds"] = seeds;
  kv["env.substeps"] = std::to_string(d.params.substeps);
  kv["env.pusher_radius"] = fmt_double(d.params.pusher_radius);
  kv["env.particle_radius"] = fmt_double(d.params.particle_radius);
  kv["env.rope_rest_length"] = fmt_double(d.params.rope_rest_length);
  kv["env.constraint_passes"] = std::to_string(d.params.constraint_passes);
  kv["env.granular_particles"] = std::to_string(d.params.granular_particles);
  kv["env.rope_particles"] = std::to_string(d.params.rope_particles);
  kv["env.granular_disk_radius"] = fmt_double(d.params.granular_disk_radius);
  kv["env.render_radius"] = fmt_double(d.params.render_radius);
  kv["byte_order"] = "little-endian float32";
  kv["observations"] = "observations.f32 [episode][frame 0..frames][row 0..grid)[col 0..grid) in [0,1]";
  kv["actions"] = "actions.f32 [episode][step 0..frames)[start_x, start_y, end_x, end_y] in [-1,1]";
  kv["clouds"] = "clouds.f32 [episode][frame 0..frames][particle][x, y] in [0,1]";
  write_key_values(dir / "manifest.txt", kv, "novelplan dataset");
  write_f32_blob(dir / "observations.f32", obs);
  write_f32_blob(dir / "actions.f32", acts);
  write_f32_blob(dir / "clouds.f32", clouds);
}

Dataset load(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  const KeyValues kv = read_key_values(manifest);
  const auto version = parse_u64(require_key(kv, "format_version", manifest), "format_version", manifest);
  if (version != static_cast<std::uint64_t>(dataset_format_version)) {
    throw LoadError(manifest.string() + ": unsupported dataset format version " + std::to_string(version) +
                    " (expected " + std::to_string(dataset_format_version) + ")");
  }
  Dataset d;
  try {
    d.kind = sim::parse_env_kind(require_key(kv, "env", manifest));
    d.policy.kind = parse_policy_kind(require_key(kv, "policy", manifest));
  } catch (const InputError& e) {
    throw LoadError(manifest.string() + ": " + e.what());
  }
  d.policy.gap.lo = parse_box(require_key(kv, "gap_lo", manifest), "gap_lo", manifest);
  d.policy.gap.hi = parse_box(require_key(kv, "gap_hi", manifest), "gap_hi", manifest);
  d.seed = parse_u64(require_key(kv, "seed", manifest), "seed", manifest);
  d.frames = parse_u64(require_key(kv, "frames", manifest), "frames", manifest);
  auto& p = d.params;
  p.grid = parse_u64(require_key(kv, "grid", manifest), "grid", manifest);
  p.substeps = parse_u64(require_key(kv, "env.substeps", manifest), "env.substeps", manifest);
  p.pusher_radius = parse_double(require_key(kv, "env.pusher_radius", manifest), "env.pusher_radius", manifest);
  p.particle_radius = parse_double(require_key(kv, "env.particle_radius", manifest), "env.particle_radius", manifest);
  p.rope_rest_length = parse_double(require_key(kv, "env.rope_rest_length", manifest), "env.rope_rest_length", manifest);
  p.constraint_passes = parse_u64(require_key(kv, "env.constraint_passes", manifest), "env.constraint_passes", manifest);
  p.granular_particles =
      parse_u64(require_key(kv, "env.granular_particles", manifest), "env.granular_particles", manifest);
  p.rope_particles = parse_u64(require_key(kv, "env.rope_particles", manifest), "env.rope_particles", manifest);
  p.granular_disk_radius =
      parse_double(require_key(kv, "env.granular_disk_radius", manifest), "env.granular_disk_radius", manifest);
  p.render_radius = parse_double(require_key(kv, "env.render_radius", manifest), "env.render_radius", manifest);

  const std::size_t episodes = parse_u64(require_key(kv, "episodes", manifest), "episodes", manifest);
  const std::size_t k = particle_count(d);
  if (parse_u64(require_key(kv, "particles", manifest), "particles", manifest) != k) {
    throw LoadError(manifest.string() + ": particle count disagrees with environment parameters");
  }
  if (episodes == 0 || d.frames == 0 || p.grid == 0) throw LoadError(manifest.string() + ": empty dataset dimensions");

  std::vector<std::uint64_t> seeds;
  {
    std::istringstream ss(require_key(kv, "episode_seeds", manifest));
    std::string item;
    while (std::getline(ss, item, ',')) seeds.push_back(parse_u64(item, "episode_seeds", manifest));
  }
  if (seeds.size() != episodes) {
    throw LoadError(manifest.string() + ": episode_seeds lists " + std::to_string(seeds.size()) + " seeds for " +
                    std::to_string(episodes) + " episodes");
  }

  const std::size_t g = p.grid;
  const std::size_t frames = d.frames;
  const auto obs = read_f32_blob(dir / "observations.f32", episodes * (frames + 1) * g * g);
  const auto acts = read_f32_blob(dir / "actions.f32", episodes * frames * 4);
  const auto clouds = read_f32_blob(dir / "clouds.f32", episodes * (frames + 1) * k * 2);

  d.episodes.resize(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto& ep = d.episodes[e];
    ep.seed = seeds[e];
    for (std::size_t f = 0; f <= frames; ++f) {
      sim::Observation o;
      o.grid = g;
      const auto base = obs.begin() + static_cast<std::ptrdiff_t>((e * (frames + 1) + f) * g * g);
      o.pixels.assign(base, base + static_cast<std::ptrdiff_t>(g * g));
      for (float v : o.pixels) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw LoadError(dir.string() + ": episode " + std::to_string(e) + " frame " + std::to_string(f) +
                          " has a pixel outside [0,1]");
        }
      }
      ep.observations.push_back(std::move(o));
      Cloud c(k);
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t at = ((e * (frames + 1) + f) * k + i) * 2;
        c[i] = {clouds[at], clouds[at + 1]};
        if (!(c[i].x >= 0.0f && c[i].x <= 1.0f && c[i].y >= 0.0f && c[i].y <= 1.0f)) {
          throw LoadError(dir.string() + ": episode " + std::to_string(e) + " frame " + std::to_string(f) +
                          " has a particle outside the unit square");
        }
      }
      ep.clouds.push_back(std::move(c));
    }
    for (std::size_t t = 0; t < frames; ++t) {
      sim::Action a{};
      for (std::size_t i = 0; i < 4; ++i) {
        a[i] = acts[(e * frames + t) * 4 + i];
        if (!(a[i] >= -1.0f && a[i] <= 1.0f)) {
          throw LoadError(dir.string() + ": episode " + std::to_string(e) + " step " + std::to_string(t) +
                          " has an action outside [-1,1]");
        }
      }
      ep.actions.push_back(a);
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InputError("split: validation fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.episodes.size();
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw InputError("split: fraction " + std::to_string(validation_fraction) + " of " + std::to_string(n) +
                     " episodes leaves an empty split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, Stream::split, 0));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  auto subset = [&](const std::vector<std::size_t>& idx) {
    Dataset d{dataset.kind, dataset.params, dataset.policy, dataset.seed, dataset.frames, {}};
    for (std::size_t i : idx) d.episodes.push_back(dataset.episodes[i]);
    return d;
  };
  return {subset(train), subset(val)};
}

void verify_replay(const Dataset& dataset) {
  for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
    const auto& ep = dataset.episodes[e];
    sim::ParticleState s{dataset.kind, static_cast<float>(dataset.params.particle_radius), ep.clouds.at(0)};
    for (std::size_t t = 0; t < ep.actions.size(); ++t) {
      s = sim::step(s, ep.actions[t], dataset.params);
      if (s.positions != ep.clouds.at(t + 1)) {
        throw LoadError("replay mismatch in episode " + std::to_string(e) + " at frame " + std::to_string(t + 1));
      }
    }
  }
}

std::vector<float> stack_observations(const Dataset& dataset) {
  std::vector<float> out;
  out.reserve(dataset.observation_count() * dataset.params.grid * dataset.params.grid);
  for (const auto& ep : dataset.episodes) {
    for (const auto& o : ep.observations) out.insert(out.end(), o.pixels.begin(), o.pixels.end());
  }
  return out;
}

}  // namespace novelplan::data
