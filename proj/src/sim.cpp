#include "novelplan/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "novelplan/error.hpp"

namespace novelplan::sim {

std::string_view to_string(EnvKind kind) { return kind == EnvKind::granular ? "granular" : "rope"; }

EnvKind parse_env_kind(std::string_view name) {
  if (name == "granular") return EnvKind::granular;
  if (name == "rope") return EnvKind::rope;
  throw InputError("unknown environment '" + std::string(name) + "' (expected granular or rope)");
}

Action clip_action(const Action& a) {
  Action out{};
  for (std::size_t i = 0; i < action_dim; ++i) {
    out[i] = std::isnan(a[i]) ? 0.0f : std::clamp(a[i], -1.0f, 1.0f);
  }
  return out;
}

ParticleState reset(EnvKind kind, std::uint64_t seed, const EnvParams& params) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ParticleState s;
  s.kind = kind;
  s.particle_radius = static_cast<float>(params.particle_radius);
  if (kind == EnvKind::granular) {
    for (std::size_t i = 0; i < params.granular_particles; ++i) {
      const double r = params.granular_disk_radius * std::sqrt(unit(rng));
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      s.positions.push_back({static_cast<float>(0.5 + r * std::cos(theta)), static_cast<float>(0.5 + r * std::sin(theta))});
    }
  } else {
    const double cx = 0.3 + 0.4 * unit(rng);
    const double cy = 0.3 + 0.4 * unit(rng);
    const double theta = std::numbers::pi * unit(rng);
    const double dx = std::cos(theta) * params.rope_rest_length;
    const double dy = std::sin(theta) * params.rope_rest_length;
    const double half = 0.5 * static_cast<double>(params.rope_particles - 1);
    for (std::size_t i = 0; i < params.rope_particles; ++i) {
      const double k = static_cast<double>(i) - half;
      s.positions.push_back({static_cast<float>(cx + k * dx), static_cast<float>(cy + k * dy)});
    }
  }
  return s;
}

namespace {

struct Vec2 {
  double x;
  double y;
};

void project_links(std::vector<Vec2>& p, double rest) {
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double dx = p[i + 1].x - p[i].x;
    const double dy = p[i + 1].y - p[i].y;
    const double d = std::hypot(dx, dy);
    if (d == 0.0) continue;
    const double c = 0.5 * (d - rest) / d;
    p[i].x += c * dx;
    p[i].y += c * dy;
    p[i + 1].x -= c * dx;
    p[i + 1].y -= c * dy;
  }
}

}  // namespace

ParticleState step(const ParticleState& state, const Action& action, const EnvParams& params) {
  const Action a = clip_action(action);
  const Vec2 start{to_unit(a[0]), to_unit(a[1])};
  const Vec2 end{to_unit(a[2]), to_unit(a[3])};
  const double len = std::hypot(end.x - start.x, end.y - start.y);
  // Travel direction breaks the tie when a particle sits on the pusher center.
  const Vec2 travel = len > 0.0 ? Vec2{(end.x - start.x) / len, (end.y - start.y) / len} : Vec2{1.0, 0.0};
  const double contact = params.pusher_radius + static_cast<double>(state.particle_radius);

  std::vector<Vec2> p;
  p.reserve(state.positions.size());
  for (const auto& q : state.positions) p.push_back({q.x, q.y});

  const auto substeps = static_cast<double>(params.substeps);
  for (std::size_t k = 0; k <= params.substeps; ++k) {
    const double t = static_cast<double>(k) / substeps;
    const Vec2 c{start.x + t * (end.x - start.x), start.y + t * (end.y - start.y)};
    for (auto& q : p) {
      const double dx = q.x - c.x;
      const double dy = q.y - c.y;
      const double d = std::hypot(dx, dy);
      if (d >= contact) continue;
      if (d == 0.0) {
        q = {c.x + contact * travel.x, c.y + contact * travel.y};
      } else {
        q = {c.x + contact * dx / d, c.y + contact * dy / d};
      }
    }
    if (state.kind == EnvKind::rope) {
      for (std::size_t pass = 0; pass < params.constraint_passes; ++pass) project_links(p, params.rope_rest_length);
    }
    for (auto& q : p) {
      q.x = std::clamp(q.x, 0.0, 1.0);
      q.y = std::clamp(q.y, 0.0, 1.0);
    }
  }

  ParticleState next = state;
  for (std::size_t i = 0; i < p.size(); ++i) {
    next.positions[i] = {static_cast<float>(p[i].x), static_cast<float>(p[i].y)};
  }
  return next;
}

Observation render(const ParticleState& state, const EnvParams& params) {
  const std::size_t g = params.grid;
  Observation obs;
  obs.grid = g;
  obs.pixels.assign(g * g, 0.0f);
  const double scale = static_cast<double>(g);
  const double radius_px = params.render_radius * scale;
  for (const auto& q : state.positions) {
    const double px = static_cast<double>(q.x) * scale;
    const double py = static_cast<double>(q.y) * scale;
    const auto lo_c = static_cast<std::ptrdiff_t>(std::floor(px - radius_px - 1.0));
    const auto hi_c = static_cast<std::ptrdiff_t>(std::ceil(px + radius_px + 1.0));
    const auto lo_r = static_cast<std::ptrdiff_t>(std::floor(py - radius_px - 1.0));
    const auto hi_r = static_cast<std::ptrdiff_t>(std::ceil(py + radius_px + 1.0));
    const auto gi = static_cast<std::ptrdiff_t>(g);
    for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(lo_r, 0); r <= std::min(hi_r, gi - 1); ++r) {
      for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(lo_c, 0); c <= std::min(hi_c, gi - 1); ++c) {
        const double d = std::hypot(static_cast<double>(c) + 0.5 - px, static_cast<double>(r) + 0.5 - py);
        // Coverage ramp: 1 inside the disk, falling to 0 across one pixel at the rim.
        const double v = std::clamp(radius_px + 0.5 - d, 0.0, 1.0);
        float& pix = obs.pixels[static_cast<std::size_t>(r) * g + static_cast<std::size_t>(c)];
        pix = std::max(pix, static_cast<float>(v));
      }
    }
  }
  return obs;
}

double max_link_deviation(const ParticleState& state, double rest_length) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < state.positions.size(); ++i) {
    const double dx = static_cast<double>(state.positions[i + 1].x) - state.positions[i].x;
    const double dy = static_cast<double>(state.positions[i + 1].y) - state.positions[i].y;
    worst = std::max(worst, std::abs(std::hypot(dx, dy) - rest_length) / rest_length);
  }
  return worst;
}

}  // namespace novelplan::sim
