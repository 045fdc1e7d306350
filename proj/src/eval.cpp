#include "novelplan/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "novelplan/chamfer.hpp"
#include "novelplan/error.hpp"
#include "novelplan/seeding.hpp"

namespace novelplan::eval {

std::vector<double> reference_weight_grid() { return {0.0, 0.125, 0.25, 0.375, 0.5}; }

std::uint64_t scene_seed(const ExperimentSpec& spec, std::size_t index) {
  return derive_seed(spec.scene_seed, Stream::goal, index);
}

Scene make_scene(const ExperimentSpec& spec, std::size_t index) {
  if (spec.goal_actions == 0) throw InputError("eval: goal_actions must be positive");
  constexpr std::size_t max_draws = 64;
  const std::uint64_t base = scene_seed(spec, index);
  for (std::size_t k = 0; k < max_draws; ++k) {
    Scene s;
    s.seed = k == 0 ? base : derive_seed(base, k);
    const auto ep = data::generate_episode(spec.kind, spec.goal_policy, spec.goal_actions, s.seed, spec.env);
    if (chamfer(ep.clouds.front(), ep.clouds.back()) < spec.min_goal_chamfer) continue;
    s.initial = sim::ParticleState{spec.kind, static_cast<float>(spec.env.particle_radius), ep.clouds.front()};
    s.goal_image = ep.observations.back();
    s.goal_cloud = ep.clouds.back();
    return s;
  }
  throw InputError("eval: no goal for scene " + std::to_string(index) + " moved the particles by the minimum Chamfer distance");
}

namespace {

void check_compatible(const ExperimentSpec& spec, const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                      const vae::NoveltyVae& vae) {
  if (codec.grid() != spec.env.grid) {
    throw ConfigError("eval: encoder expects a " + std::to_string(codec.grid()) + "px grid but the environment renders " +
                      std::to_string(spec.env.grid) + "px");
  }
  if (model.latent_dim() != codec.latent_dim()) throw ConfigError("eval: transition and encoder latent dims differ");
  if (vae.latent_dim() != codec.latent_dim()) throw ConfigError("eval: vae and encoder latent dims differ");
  if (spec.weights.empty()) throw InputError("eval: weight grid is empty");
  if (spec.scenes == 0) throw InputError("eval: need at least one scene");
  plan::validate(spec.plan);
}

}  // namespace

EvalResult evaluate(const ExperimentSpec& spec, const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                    const vae::NoveltyVae& vae, plan::Evaluation jobs) {
  check_compatible(spec, codec, model, vae);
  std::vector<Scene> scenes;
  for (std::size_t i = 0; i < spec.scenes; ++i) scenes.push_back(make_scene(spec, i));

  const std::size_t nw = spec.weights.size();
  const auto total = static_cast<std::ptrdiff_t>(nw * spec.scenes);
  std::vector<ResultRow> rows(static_cast<std::size_t>(total));
  const std::string env_name{sim::to_string(spec.kind)};

  auto run_job = [&](std::size_t job) {
    const std::size_t wi = job / spec.scenes;
    const std::size_t si = job % spec.scenes;
    const Scene& scene = scenes[si];
    plan::PlanConfig pc = spec.plan;
    pc.weight = spec.weights[wi];
    // Same planner draws for a scene at every weight, so weights are compared pairwise.
    pc.seed = derive_seed(spec.plan.seed, scene.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const auto trace = plan::mpc_run(spec.env, codec, model, vae, scene.initial, scene.goal_image, pc, spec.mpc,
                                     &scene.goal_cloud, plan::Evaluation::serial);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rows[job] = ResultRow{env_name, pc.weight, scene.seed, *trace.final_chamfer, trace.novelty_mean(), dt.count()};
  };

  if (jobs == plan::Evaluation::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < total; ++j) run_job(static_cast<std::size_t>(j));
  } else {
    for (std::ptrdiff_t j = 0; j < total; ++j) run_job(static_cast<std::size_t>(j));
  }
  EvalResult out;
  out.rows = std::move(rows);
  out.summary = summarize(out.rows);
  return out;
}

std::vector<WeightSummary> summarize(std::span<const ResultRow> rows) {
  std::vector<WeightSummary> out;
  for (const auto& r : rows) {
    if (std::none_of(out.begin(), out.end(), [&](const WeightSummary& s) { return s.w == r.w; })) {
      out.push_back({r.w, 0, 0.0, 0.0, 0.0});
    }
  }
  for (auto& s : out) {
    std::vector<double> cd;
    double nov = 0.0;
    for (const auto& r : rows) {
      if (r.w != s.w) continue;
      cd.push_back(r.chamfer_final);
      nov += r.novelty_mean;
    }
    s.count = cd.size();
    double sum = 0.0;
    for (double v : cd) sum += v;
    s.chamfer_mean = sum / static_cast<double>(s.count);
    s.novelty_mean = nov / static_cast<double>(s.count);
    if (s.count > 1) {
      double ss = 0.0;
      for (double v : cd) ss += (v - s.chamfer_mean) * (v - s.chamfer_mean);
      s.chamfer_std = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
  }
  return out;
}

void write_results_csv(std::ostream& os, std::span<const ResultRow> rows, bool with_seconds) {
  os << "env,w,seed,chamfer_final,novelty_mean,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%llu,%.9g,%.9g,%.3f\n", r.env.c_str(), r.w,
                  static_cast<unsigned long long>(r.seed), r.chamfer_final, r.novelty_mean,
                  with_seconds ? r.seconds : 0.0);
    os << buf;
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "env,w,seed,chamfer_final,novelty_mean,seconds") {
    throw LoadError("results csv: unexpected header");
  }
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw LoadError("results csv: line " + std::to_string(lineno) + " has wrong column count");
    try {
      rows.push_back({cells[0], std::stod(cells[1]), std::stoull(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                      std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw LoadError("results csv: line " + std::to_string(lineno) + " is not numeric");
    }
  }
  return rows;
}

void write_timings_csv(std::ostream& os, std::span<const ResultRow> rows) {
  os << "env,w,seed,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%llu,%.3f\n", r.env.c_str(), r.w, static_cast<unsigned long long>(r.seed),
                  r.seconds);
    os << buf;
  }
}

void write_summary(std::ostream& os, std::span<const WeightSummary> summary) {
  char buf[200];
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "w=%-6g chamfer %.6f +- %.6f  novelty %.6f  (n=%zu)\n", s.w, s.chamfer_mean,
                  s.chamfer_std, s.novelty_mean, s.count);
    os << buf;
  }
}

double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

OodReport ood_report_from_scores(std::span<const double> id_scores, std::span<const double> ood_scores,
                                 std::size_t bins) {
  if (id_scores.empty() || ood_scores.empty()) throw InputError("ood report: both score sets must be non-empty");
  if (bins == 0) throw InputError("ood report: need at least one histogram bin");
  OodReport r;
  r.id_count = id_scores.size();
  r.ood_count = ood_scores.size();
  r.median_id = median({id_scores.begin(), id_scores.end()});
  r.median_ood = median({ood_scores.begin(), ood_scores.end()});
  r.ratio = r.median_ood / r.median_id;

  double lo = std::min(*std::min_element(id_scores.begin(), id_scores.end()),
                       *std::min_element(ood_scores.begin(), ood_scores.end()));
  double hi = std::max(*std::max_element(id_scores.begin(), id_scores.end()),
                       *std::max_element(ood_scores.begin(), ood_scores.end()));
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  r.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    r.bins[b].lo = lo + width * static_cast<double>(b);
    r.bins[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  auto bin_of = [&](double v) {
    const auto b = static_cast<std::size_t>((v - lo) / width);
    return std::min(b, bins - 1);
  };
  for (double v : id_scores) ++r.bins[bin_of(v)].id_count;
  for (double v : ood_scores) ++r.bins[bin_of(v)].ood_count;
  return r;
}

OodReport ood_report(const vae::NoveltyVae& vae, std::span<const float> id_latents, std::span<const float> ood_latents,
                     std::size_t bins) {
  const auto id = vae.score_rows(id_latents);
  const auto ood = vae.score_rows(ood_latents);
  return ood_report_from_scores(id, ood, bins);
}

void write_histogram_csv(std::ostream& os, const OodReport& report) {
  os << "bin_lo,bin_hi,id_count,ood_count\n";
  char buf[160];
  for (const auto& b : report.bins) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%zu,%zu\n", b.lo, b.hi, b.id_count, b.ood_count);
    os << buf;
  }
}

void write_ood_summary(std::ostream& os, const OodReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "id_count %zu\nood_count %zu\nmedian_id %.9g\nmedian_ood %.9g\nratio %.6f\n",
                r.id_count, r.ood_count, r.median_id, r.median_ood, r.ratio);
  os << buf;
}

Raster rollout_strip(const wm::ObservationCodec& codec, const wm::TransitionModel& model,
                     const data::Episode& episode, const sim::Observation* goal) {
  const std::size_t g = codec.grid();
  const std::size_t f = model.frame_skip();
  if (episode.observations.empty() || episode.actions.empty()) throw InputError("strip: episode is empty");
  const std::size_t steps = episode.actions.size() / f;
  if (steps == 0) throw InputError("strip: episode is shorter than one model step");
  const sim::Observation& goal_obs = goal ? *goal : episode.observations.back();
  for (const auto& o : episode.observations) {
    if (o.grid != g) throw InputError("strip: observation grid does not match the encoder");
  }
  if (goal_obs.grid != g) throw InputError("strip: goal grid does not match the encoder");

  std::vector<float> actions;
  for (std::size_t i = 0; i < steps * f; ++i) actions.insert(actions.end(), episode.actions[i].begin(), episode.actions[i].end());
  const auto predicted = model.rollout(model.initial_window(codec.encode(episode.observations.front())), actions);

  Raster img;
  img.width = (steps + 1) * g;
  img.height = 2 * g;
  img.pixels.assign(img.width * img.height, 0.0f);
  auto blit = [&](std::span<const float> tile, std::size_t row, std::size_t col) {
    for (std::size_t y = 0; y < g; ++y) {
      std::copy_n(tile.begin() + static_cast<std::ptrdiff_t>(y * g), g,
                  img.pixels.begin() + static_cast<std::ptrdiff_t>((row * g + y) * img.width + col * g));
    }
  };
  for (std::size_t k = 0; k < steps; ++k) {
    blit(episode.observations[(k + 1) * f].pixels, 0, k);
    blit(codec.decode(predicted[k]), 1, k);
  }
  blit(goal_obs.pixels, 0, steps);
  blit(goal_obs.pixels, 1, steps);
  return img;
}

}  // namespace novelplan::eval
