#include <cmath>
#include <random>

#include "doctest.h"
#include "novelplan/chamfer.hpp"
#include "novelplan/error.hpp"
#include "novelplan/sim.hpp"
#include "oracles.hpp"

using namespace novelplan;
using sim::Action;
using sim::EnvKind;
using sim::Point;

namespace {

Action random_action(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  return {u(rng), u(rng), u(rng), u(rng)};
}

std::vector<Point> random_cloud(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Point> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  for (auto kind : {EnvKind::granular, EnvKind::rope}) {
    CHECK(sim::reset(kind, 5) == sim::reset(kind, 5));
    CHECK_FALSE(sim::reset(kind, 5) == sim::reset(kind, 6));
  }
}

TEST_CASE("granular reset stays inside the start disk") {
  const sim::EnvParams p;
  const auto s = sim::reset(EnvKind::granular, 12, p);
  CHECK(s.positions.size() == p.granular_particles);
  for (const auto& q : s.positions) CHECK(std::hypot(q.x - 0.5, q.y - 0.5) <= p.granular_disk_radius + 1e-6);
}

TEST_CASE("rope reset is a straight chain at rest length") {
  const sim::EnvParams p;
  const auto s = sim::reset(EnvKind::rope, 3, p);
  CHECK(s.positions.size() == p.rope_particles);
  CHECK(sim::max_link_deviation(s, p.rope_rest_length) < 1e-4);
}

TEST_CASE("a pusher sweeping empty space moves nothing") {
  sim::ParticleState s;
  s.positions = {{0.5f, 0.5f}};
  const auto next = sim::step(s, {-0.9f, -0.9f, -0.8f, -0.8f});
  CHECK(next == s);
}

TEST_CASE("a sweep through a particle pushes it out to the contact radius") {
  sim::ParticleState s;
  s.positions = {{0.5f, 0.52f}};
  const sim::EnvParams p;
  const auto next = sim::step(s, {-0.5f, 0.0f, 0.2f, 0.0f}, p);
  const auto& q = next.positions[0];
  const double end_x = sim::to_unit(0.2f);
  const double d = std::hypot(q.x - end_x, q.y - 0.5);
  CHECK(d >= p.pusher_radius + p.particle_radius - 1e-5);
  CHECK(q.x > 0.5f);
}

TEST_CASE("step matches the free-particle replay oracle on granular scenes") {
  std::mt19937_64 rng(77);
  const sim::EnvParams p;
  for (int trial = 0; trial < 50; ++trial) {
    auto s = sim::reset(EnvKind::granular, static_cast<std::uint64_t>(trial), p);
    const Action a = random_action(rng);
    const auto next = sim::step(s, a, p);
    const auto ref = oracle::sweep(s.positions, a, p.pusher_radius, p.particle_radius, p.substeps);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(next.positions[i].x == doctest::Approx(ref[i].x).epsilon(1e-5));
      CHECK(next.positions[i].y == doctest::Approx(ref[i].y).epsilon(1e-5));
    }
  }
}

TEST_CASE("after a step no particle overlaps the final pusher disk") {
  std::mt19937_64 rng(3);
  const sim::EnvParams p;
  for (auto kind : {EnvKind::granular}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto s = sim::reset(kind, static_cast<std::uint64_t>(trial), p);
      const Action a = random_action(rng);
      const auto next = sim::step(s, a, p);
      const double ex = sim::to_unit(a[2]), ey = sim::to_unit(a[3]);
      const double contact = p.pusher_radius + p.particle_radius;
      for (const auto& q : next.positions) {
        // Clamping to the arena can pull a particle back inside the disk near a wall.
        const bool walled = q.x == 0.0f || q.x == 1.0f || q.y == 0.0f || q.y == 1.0f;
        if (!walled) CHECK(std::hypot(q.x - ex, q.y - ey) >= contact - 1e-5);
      }
    }
  }
}

TEST_CASE("particles stay inside the unit square") {
  std::mt19937_64 rng(8);
  const sim::EnvParams p;
  for (auto kind : {EnvKind::granular, EnvKind::rope}) {
    auto s = sim::reset(kind, 1, p);
    for (int t = 0; t < 200; ++t) {
      s = sim::step(s, random_action(rng), p);
      for (const auto& q : s.positions) {
        CHECK(q.x >= 0.0f);
        CHECK(q.x <= 1.0f);
        CHECK(q.y >= 0.0f);
        CHECK(q.y <= 1.0f);
      }
    }
  }
}

TEST_CASE("rope links stay near rest length") {
  std::mt19937_64 rng(21);
  const sim::EnvParams p;
  for (int ep = 0; ep < 20; ++ep) {
    auto s = sim::reset(EnvKind::rope, static_cast<std::uint64_t>(ep), p);
    for (int t = 0; t < 10; ++t) {
      s = sim::step(s, random_action(rng), p);
      CHECK(sim::max_link_deviation(s, p.rope_rest_length) < 0.5);
    }
  }
}

TEST_CASE("step clips out-of-range actions") {
  const auto s = sim::reset(EnvKind::granular, 4);
  CHECK(sim::step(s, {-3.0f, 0.0f, 5.0f, 0.0f}) == sim::step(s, {-1.0f, 0.0f, 1.0f, 0.0f}));
  CHECK(sim::clip_action({NAN, 2.0f, -2.0f, 0.5f}) == Action{0.0f, 1.0f, -1.0f, 0.5f});
}

TEST_CASE("a particle on the pusher centre leaves along the travel direction") {
  sim::ParticleState s;
  s.positions = {{0.5f, 0.5f}};
  const auto next = sim::step(s, {0.0f, 0.0f, 0.0f, 0.0f});
  CHECK(next.positions[0].x > 0.5f);
  CHECK(next.positions[0].y == 0.5f);
}

TEST_CASE("step is deterministic") {
  std::mt19937_64 rng(1);
  const auto s = sim::reset(EnvKind::rope, 9);
  const Action a = random_action(rng);
  CHECK(sim::step(s, a) == sim::step(s, a));
}

TEST_CASE("render covers the particle pixel and stays in [0, 1]") {
  sim::ParticleState s;
  s.positions = {{0.5f, 0.25f}};
  const sim::EnvParams p;
  const auto obs = sim::render(s, p);
  REQUIRE(obs.pixels.size() == p.grid * p.grid);
  CHECK(obs.pixels[8 * p.grid + 16] == 1.0f);
  CHECK(obs.pixels[0] == 0.0f);
  for (float v : obs.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("render of an empty state is blank") {
  const sim::ParticleState s;
  const auto obs = sim::render(s);
  for (float v : obs.pixels) CHECK(v == 0.0f);
}

TEST_CASE("parse_env_kind round trips and rejects unknown names") {
  CHECK(sim::parse_env_kind(sim::to_string(EnvKind::rope)) == EnvKind::rope);
  CHECK_THROWS_AS(sim::parse_env_kind("sand"), InputError);
}

TEST_CASE("chamfer of a set with itself is zero") {
  std::mt19937_64 rng(2);
  const auto a = random_cloud(rng, 20);
  CHECK(chamfer(a, a) == 0.0);
}

TEST_CASE("chamfer of two single points is twice the squared distance") {
  const std::vector<Point> a{{0.0f, 0.0f}}, b{{0.3f, 0.4f}};
  CHECK(chamfer(a, b) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("chamfer is symmetric and non-negative") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_cloud(rng, 7 + t);
    const auto b = random_cloud(rng, 13);
    CHECK(chamfer(a, b) == chamfer(b, a));
    CHECK(chamfer(a, b) >= 0.0);
  }
}

TEST_CASE("chamfer matches the exhaustive oracle") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_cloud(rng, 1 + t % 20);
    const auto b = random_cloud(rng, 1 + (t * 7) % 23);
    CHECK(std::abs(chamfer(a, b) - oracle::chamfer(a, b)) < 1e-9);
  }
}

TEST_CASE("parallel and serial chamfer agree bit for bit") {
  std::mt19937_64 rng(6);
  const auto a = random_cloud(rng, 300);
  const auto b = random_cloud(rng, 257);
  CHECK(chamfer_serial(a, b) == chamfer_parallel(a, b));
}

TEST_CASE("chamfer rejects an empty set") {
  const std::vector<Point> a{{0.0f, 0.0f}}, none;
  CHECK_THROWS_AS(chamfer(a, none), InputError);
}
