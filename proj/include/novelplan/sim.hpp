#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace novelplan::sim {

enum class EnvKind { granular, rope };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

struct Point {
  float x = 0.0f;
  float y = 0.0f;
  friend bool operator==(const Point&, const Point&) = default;
};

// Pusher motion: start (x, y), end (x, y), each in [-1, 1].
using Action = std::array<float, 4>;
inline constexpr std::size_t action_dim = 4;

Action clip_action(const Action& a);

// Maps a normalized action coordinate in [-1, 1] to the unit interval.
inline double to_unit(float a) { return (static_cast<double>(a) + 1.0) * 0.5; }

struct EnvParams {
  std::size_t substeps = 16;
  double pusher_radius = 0.06;
  double particle_radius = 0.02;
  double rope_rest_length = 0.05;
  std::size_t constraint_passes = 8;
  std::size_t granular_particles = 16;
  std::size_t rope_particles = 12;
  // Granular scenes start uniformly inside this disk around the arena center.
  double granular_disk_radius = 0.05;
  std::size_t grid = 32;
  // Visual splat radius; larger than the contact radius so particles span
  // more than one pixel at 32x32.
  double render_radius = 0.04;

  friend bool operator==(const EnvParams&, const EnvParams&) = default;
};

struct ParticleState {
  EnvKind kind = EnvKind::granular;
  float particle_radius = 0.02f;
  std::vector<Point> positions;

  friend bool operator==(const ParticleState&, const ParticleState&) = default;
};

struct Observation {
  std::size_t grid = 0;
  std::vector<float> pixels;  // row-major grid x grid, row index follows y

  friend bool operator==(const Observation&, const Observation&) = default;
};

ParticleState reset(EnvKind kind, std::uint64_t seed, const EnvParams& params = {});

// Sweeps the pusher from start to end. The action is clipped first.
ParticleState step(const ParticleState& state, const Action& action, const EnvParams& params = {});

Observation render(const ParticleState& state, const EnvParams& params = {});

// Largest relative deviation |d - L| / L over consecutive links.
double max_link_deviation(const ParticleState& state, double rest_length);

}  // namespace novelplan::sim
