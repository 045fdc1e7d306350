#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "novelplan/dataset.hpp"
#include "novelplan/error.hpp"

using namespace novelplan;
using data::PolicyKind;
using data::PolicySpec;
using sim::EnvKind;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("novelplan_test_dataset_" + name);
  fs::remove_all(dir);
  return dir;
}

const PolicySpec gapped{PolicyKind::gapped, data::GapRegion::start_x_positive()};

}  // namespace

TEST_CASE("gapped samples never fall inside the gap") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto a = data::sample_action(gapped, rng);
    CHECK_FALSE(gapped.gap.contains(a));
    for (float v : a) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("gap actions always fall inside the gap") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) CHECK(gapped.gap.contains(data::sample_gap_action(gapped.gap, rng)));
}

TEST_CASE("uniform samples reach the gap") {
  std::mt19937_64 rng(3);
  int inside = 0;
  for (int i = 0; i < 1000; ++i) inside += gapped.gap.contains(data::sample_action({}, rng));
  CHECK(inside > 400);
  CHECK(inside < 600);
}

TEST_CASE("episodes have frames + 1 observations and clouds") {
  const auto ep = data::generate_episode(EnvKind::granular, {}, 5, 9);
  CHECK(ep.actions.size() == 5);
  CHECK(ep.observations.size() == 6);
  CHECK(ep.clouds.size() == 6);
  CHECK(ep.seed == 9);
}

TEST_CASE("generation is deterministic, and serial and parallel agree") {
  const auto a = data::generate(EnvKind::rope, gapped, 6, 4, 42);
  const auto b = data::generate(EnvKind::rope, gapped, 6, 4, 42);
  const auto c = data::generate_serial(EnvKind::rope, gapped, 6, 4, 42);
  CHECK(a == b);
  CHECK(a == c);
  CHECK_FALSE(a == data::generate(EnvKind::rope, gapped, 6, 4, 43));
}

TEST_CASE("episode seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) seen.insert(data::episode_seed(5, i));
  CHECK(seen.size() == 1000);
}

TEST_CASE("generate rejects degenerate sizes") {
  CHECK_THROWS_AS(data::generate(EnvKind::granular, {}, 0, 5, 1), InputError);
  CHECK_THROWS_AS(data::generate(EnvKind::granular, {}, 3, 1, 1), InputError);
}

TEST_CASE("default sizes depend on the environment") {
  CHECK(data::default_episodes(EnvKind::granular) == 100);
  CHECK(data::default_episodes(EnvKind::rope) == 1000);
}

TEST_CASE("save then load is lossless") {
  const auto d = data::generate(EnvKind::granular, gapped, 4, 3, 7);
  const auto dir = scratch("roundtrip");
  data::save(d, dir);
  CHECK(data::load(dir) == d);
  fs::remove_all(dir);
}

TEST_CASE("load rejects an unknown format version") {
  const auto d = data::generate(EnvKind::granular, {}, 2, 2, 7);
  const auto dir = scratch("version");
  data::save(d, dir);
  std::ifstream in(dir / "manifest.txt");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const auto pos = text.find("format_version: 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 17, "format_version: 7");
  std::ofstream(dir / "manifest.txt") << text;
  CHECK_THROWS_WITH_AS(data::load(dir), doctest::Contains("version"), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("load rejects a truncated blob") {
  const auto d = data::generate(EnvKind::granular, {}, 2, 2, 7);
  const auto dir = scratch("truncated");
  data::save(d, dir);
  fs::resize_file(dir / "observations.f32", fs::file_size(dir / "observations.f32") - 8);
  CHECK_THROWS_AS(data::load(dir), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("load rejects a missing directory") {
  CHECK_THROWS_AS(data::load(scratch("missing")), LoadError);
}

TEST_CASE("split partitions episodes without overlap") {
  const auto d = data::generate(EnvKind::granular, {}, 20, 2, 3);
  const auto [train, val] = data::split(d, 0.25, 11);
  CHECK(train.episodes.size() == 15);
  CHECK(val.episodes.size() == 5);
  std::set<std::uint64_t> seeds;
  for (const auto& e : train.episodes) seeds.insert(e.seed);
  for (const auto& e : val.episodes) CHECK(seeds.insert(e.seed).second);
  CHECK(seeds.size() == 20);
  const auto again = data::split(d, 0.25, 11);
  CHECK(again.first == train);
}

TEST_CASE("split rejects fractions that empty either side") {
  const auto d = data::generate(EnvKind::granular, {}, 4, 2, 3);
  CHECK_THROWS_AS(data::split(d, 0.0, 1), InputError);
  CHECK_THROWS_AS(data::split(d, 1.0, 1), InputError);
  CHECK_THROWS_AS(data::split(d, 0.05, 1), InputError);
}

TEST_CASE("replay of a generated dataset is bit-exact") {
  const auto d = data::generate(EnvKind::rope, gapped, 5, 6, 8);
  CHECK_NOTHROW(data::verify_replay(d));
  auto bad = d;
  bad.episodes[2].clouds[3][0].x += 0.01f;
  CHECK_THROWS_WITH_AS(data::verify_replay(bad), doctest::Contains("episode 2"), LoadError);
}

TEST_CASE("gap probe episodes use only gap actions") {
  const auto probe = data::generate_gap_probe(EnvKind::granular, gapped.gap, 5, 4, 1);
  for (const auto& ep : probe.episodes) {
    for (const auto& a : ep.actions) CHECK(gapped.gap.contains(a));
  }
}

TEST_CASE("stack_observations has one image per frame") {
  const auto d = data::generate(EnvKind::granular, {}, 3, 4, 1);
  CHECK(data::stack_observations(d).size() == d.observation_count() * d.params.grid * d.params.grid);
}
