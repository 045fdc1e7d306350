#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "novelplan/sim.hpp"

namespace novelplan::data {

enum class PolicyKind { uniform, gapped };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

// Open axis-aligned box in action space: lo[i] < a[i] < hi[i] for every i.
struct GapRegion {
  std::array<float, 4> lo;
  std::array<float, 4> hi;

  bool contains(const sim::Action& a) const;
  // Half-space start-x > 0.
  static GapRegion start_x_positive();

  friend bool operator==(const GapRegion&, const GapRegion&) = default;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::uniform;
  GapRegion gap = GapRegion::start_x_positive();

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

// Each coordinate i.i.d. uniform in [-1, 1]; gapped rejects samples inside the gap.
sim::Action sample_action(const PolicySpec& policy, std::mt19937_64& rng);
// Uniform over the part of [-1, 1]^4 inside the gap.
sim::Action sample_gap_action(const GapRegion& gap, std::mt19937_64& rng);

using Cloud = std::vector<sim::Point>;

struct Episode {
  std::vector<sim::Observation> observations;  // frames + 1
  std::vector<sim::Action> actions;            // frames
  std::vector<Cloud> clouds;                   // frames + 1
  std::uint64_t seed = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct Dataset {
  sim::EnvKind kind = sim::EnvKind::granular;
  sim::EnvParams params;
  PolicySpec policy;
  std::uint64_t seed = 0;
  std::size_t frames = 0;  // actions per episode
  std::vector<Episode> episodes;

  std::size_t observation_count() const { return episodes.size() * (frames + 1); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int dataset_format_version = 1;

std::uint64_t episode_seed(std::uint64_t dataset_seed, std::size_t index);

// Rolls one random-policy episode. Initial state and action stream are drawn
// from independent children of `seed`.
Episode generate_episode(sim::EnvKind kind, const PolicySpec& policy, std::size_t frames, std::uint64_t seed,
                         const sim::EnvParams& params = {});

// Reference training-set sizes: 100 granular episodes, 1000 rope episodes.
std::size_t default_episodes(sim::EnvKind kind);

Dataset generate(sim::EnvKind kind, const PolicySpec& policy, std::size_t episodes, std::size_t frames,
                 std::uint64_t seed, const sim::EnvParams& params = {});
Dataset generate_serial(sim::EnvKind kind, const PolicySpec& policy, std::size_t episodes, std::size_t frames,
                        std::uint64_t seed, const sim::EnvParams& params = {});

// Episodes driven only by actions inside the gap: states the gapped policy never visits.
Dataset generate_gap_probe(sim::EnvKind kind, const GapRegion& gap, std::size_t episodes, std::size_t frames,
                           std::uint64_t seed, const sim::EnvParams& params = {});

// Directory with manifest.txt plus observations.f32, actions.f32, clouds.f32.
void save(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

// Episode-level split; the validation half gets round(fraction * episodes).
std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction, std::uint64_t seed);

// Re-simulates every episode from its first cloud; throws LoadError naming
// the first mismatching episode/frame.
void verify_replay(const Dataset& dataset);

// All observations, row-major, grid*grid floats each, in episode/frame order.
std::vector<float> stack_observations(const Dataset& dataset);

}  // namespace novelplan::data
