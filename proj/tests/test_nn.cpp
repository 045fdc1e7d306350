#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "novelplan/checkpoint.hpp"
#include "novelplan/error.hpp"
#include "novelplan/grad_check.hpp"
#include "novelplan/nn.hpp"
#include "oracles.hpp"

using namespace novelplan;
using nn::Activation;

namespace {

nn::DenseNet identity_layer(Activation act) {
  nn::Layer l;
  l.in = l.out = 2;
  l.weight = {1, 0, 0, 1};
  l.bias = {0, 0};
  l.activation = act;
  return nn::DenseNet({l});
}

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("forward through an identity layer returns the input") {
  const auto net = identity_layer(Activation::identity);
  const std::vector<float> x{1, 2};
  CHECK(net.forward(x) == std::vector<float>{1, 2});
}

TEST_CASE("relu zeroes negative coordinates") {
  const auto net = identity_layer(Activation::relu);
  const std::vector<float> x{-1, 2};
  CHECK(net.forward(x) == std::vector<float>{0, 2});
}

TEST_CASE("forward of a seeded two-layer net matches the scalar evaluator") {
  const nn::DenseNet net(nn::mlp({3, 5, 2}, Activation::tanh, Activation::sigmoid), 7);
  const std::vector<float> zeros(3, 0.0f);
  const auto y = net.forward(zeros);
  const auto ref = oracle::forward(net, zeros);
  REQUIRE(y.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  const auto x = random_vector(3, 4);
  const auto y2 = net.forward(x);
  const auto ref2 = oracle::forward(net, x);
  for (std::size_t i = 0; i < 2; ++i) CHECK(y2[i] == doctest::Approx(ref2[i]).epsilon(1e-6));
}

TEST_CASE("forward rejects a wrong input length") {
  const nn::DenseNet net(nn::mlp({3, 2}, Activation::tanh, Activation::identity), 1);
  const std::vector<float> x(4, 0.0f);
  CHECK_THROWS_AS(net.forward(x), InputError);
}

TEST_CASE("forward is pure") {
  const nn::DenseNet net(nn::mlp({6, 8, 3}, Activation::tanh, Activation::identity), 11);
  const auto x = random_vector(6, 2);
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("construction rejects layers that do not chain") {
  nn::Layer a;
  a.in = 2;
  a.out = 3;
  a.weight.assign(6, 0.0f);
  a.bias.assign(3, 0.0f);
  nn::Layer b;
  b.in = 4;
  b.out = 1;
  b.weight.assign(4, 0.0f);
  b.bias.assign(1, 0.0f);
  CHECK_THROWS_AS(nn::DenseNet({a, b}), InputError);
}

TEST_CASE("initialization stays inside the fan-based bound") {
  const nn::DenseNet net(nn::mlp({10, 6}, Activation::tanh, Activation::identity), 3);
  const float s = std::sqrt(6.0f / 16.0f);
  for (float w : net.layers()[0].weight) CHECK(std::abs(w) <= s);
  for (float b : net.layers()[0].bias) CHECK(b == 0.0f);
}

TEST_CASE("linear layer gradient is the outer product with the input") {
  const nn::DenseNet net(nn::mlp({3, 2}, Activation::identity, Activation::identity), 5);
  const std::vector<float> x{0.5f, -1.0f, 2.0f};
  nn::ForwardCache cache;
  net.forward(x, cache);
  const std::vector<float> up{1.0f, 1.0f};
  const auto g = net.backward(cache, up);
  REQUIRE(g.weight.size() == 1);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.weight[0][o * 3 + i] == x[i]);
    CHECK(g.bias[0][o] == 1.0f);
  }
}

TEST_CASE("relu passes no gradient through negative coordinates") {
  const auto net = identity_layer(Activation::relu);
  const std::vector<float> x{-1.0f, 2.0f};
  nn::ForwardCache cache;
  net.forward(x, cache);
  const std::vector<float> up{1.0f, 1.0f};
  const auto g = net.backward(cache, up);
  CHECK(g.input[0] == 0.0f);
  CHECK(g.input[1] == 1.0f);
  CHECK(g.bias[0][0] == 0.0f);
}

TEST_CASE("backward without a cached forward pass is a contract violation") {
  const nn::DenseNet net(nn::mlp({2, 2}, Activation::tanh, Activation::identity), 1);
  nn::ForwardCache empty;
  const std::vector<float> up{1.0f, 1.0f};
  CHECK_THROWS_AS(net.backward(empty, up), ContractError);
}

TEST_CASE("gradients have the parameter shapes") {
  const nn::DenseNet net(nn::mlp({4, 7, 3}, Activation::tanh, Activation::identity), 2);
  nn::ForwardCache cache;
  const auto x = random_vector(4, 1);
  net.forward(x, cache);
  const std::vector<float> up(3, 1.0f);
  const auto g = net.backward(cache, up);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    CHECK(g.weight[l].size() == net.layers()[l].weight.size());
    CHECK(g.bias[l].size() == net.layers()[l].bias.size());
  }
  CHECK(g.input.size() == 4);
}

TEST_CASE("backward_accumulate adds scaled gradients") {
  const nn::DenseNet net(nn::mlp({3, 4, 2}, Activation::tanh, Activation::identity), 9);
  nn::ForwardCache cache;
  const auto x = random_vector(3, 8);
  net.forward(x, cache);
  const std::vector<float> up{0.3f, -0.7f};
  const auto g = net.backward(cache, up);
  auto acc = nn::zero_gradients(net);
  net.backward_accumulate(cache, up, acc, 0.5f);
  net.backward_accumulate(cache, up, acc, 0.5f);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (std::size_t i = 0; i < g.weight[l].size(); ++i) CHECK(acc.weight[l][i] == doctest::Approx(g.weight[l][i]));
  }
}

TEST_CASE("grad_check on a linear net is exact up to rounding") {
  const nn::DenseNet net(nn::mlp({5, 4, 3}, Activation::identity, Activation::identity), 1);
  CHECK(nn::grad_check(net, random_vector(5, 1), 1e-5) < 1e-7);
}

TEST_CASE("grad_check on a tanh MLP with seed 3") {
  const nn::DenseNet net(nn::mlp({6, 10, 10, 4}, Activation::tanh, Activation::identity), 3);
  CHECK(nn::grad_check(net, random_vector(6, 3), 1e-5) < 1e-4);
}

TEST_CASE("grad_check on a three-layer net with seed 13, every activation") {
  for (auto act : {Activation::tanh, Activation::sigmoid, Activation::relu, Activation::identity}) {
    CAPTURE(nn::to_string(act));
    const nn::DenseNet net(nn::mlp({5, 9, 7, 3}, act, Activation::sigmoid), 13);
    CHECK(nn::grad_check(net, random_vector(5, 13), 1e-5) < 1e-4);
  }
}

TEST_CASE("grad_check catches a sign-flipped backward") {
  const nn::DenseNet net(nn::mlp({4, 6, 2}, Activation::tanh, Activation::identity), 5);
  const auto flipped = [](const nn::CheckNet& n, const nn::BasicForwardCache<nn::CheckScalar>& c,
                          std::span<const nn::CheckScalar> up) {
    auto g = n.backward(c, up);
    for (auto& w : g.weight.front()) w = -w;
    return g;
  };
  CHECK(nn::grad_check_with(net, random_vector(4, 5), 1e-5, flipped) > 0.1);
}

TEST_CASE("grad_check rejects an out-of-range epsilon") {
  const nn::DenseNet net(nn::mlp({2, 2}, Activation::tanh, Activation::identity), 1);
  CHECK_THROWS_AS(nn::grad_check(net, random_vector(2, 1), 1e-2), InputError);
  CHECK_THROWS_AS(nn::grad_check(net, random_vector(2, 1), 1e-9), InputError);
}

TEST_CASE("grad_check names the layer holding a non-finite activation") {
  nn::Layer l;
  l.in = 1;
  l.out = 1;
  l.weight = {std::numeric_limits<float>::infinity()};
  l.bias = {0.0f};
  const nn::DenseNet net({l});
  const std::vector<float> x{1.0f};
  CHECK_THROWS_WITH_AS(nn::grad_check(net, x, 1e-5), doctest::Contains("layer 0"), NumericError);
}

TEST_CASE("train_step fits y = 2x") {
  nn::DenseNet net(nn::mlp({1, 1}, Activation::identity, Activation::identity), 1);
  nn::OptimizerState opt(net, nn::AdamConfig{0.05});
  std::vector<float> xs, ys;
  for (int i = -10; i <= 10; ++i) {
    xs.push_back(static_cast<float>(i) / 10.0f);
    ys.push_back(2.0f * static_cast<float>(i) / 10.0f);
  }
  for (int s = 0; s < 200; ++s) nn::train_step(net, opt, xs, ys);
  CHECK(net.layers()[0].weight[0] == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("loss on a fixed batch does not increase over 100 steps of linear regression") {
  nn::DenseNet net(nn::mlp({3, 2}, Activation::identity, Activation::identity), 4);
  nn::OptimizerState opt(net, nn::AdamConfig{1e-3});
  const auto xs = random_vector(3 * 16, 1);
  std::vector<float> ys(2 * 16);
  for (std::size_t b = 0; b < 16; ++b) {
    ys[2 * b] = xs[3 * b] - 0.5f * xs[3 * b + 1];
    ys[2 * b + 1] = 0.25f * xs[3 * b + 2] + 1.0f;
  }
  double prev = nn::train_step(net, opt, xs, ys);
  for (int s = 1; s < 100; ++s) {
    const double cur = nn::train_step(net, opt, xs, ys);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  nn::DenseNet net(nn::mlp({3, 4, 2}, Activation::tanh, Activation::identity), 6);
  const auto before = net.layers();
  nn::OptimizerState opt(net, nn::AdamConfig{0.0});
  nn::train_step(net, opt, random_vector(6, 1), random_vector(4, 2));
  for (std::size_t l = 0; l < before.size(); ++l) {
    CHECK(net.layers()[l].weight == before[l].weight);
    CHECK(net.layers()[l].bias == before[l].bias);
  }
}

TEST_CASE("mse is zero with zero gradient when the target equals the output") {
  const std::vector<float> y{0.5f, -1.0f, 3.0f};
  std::vector<float> g(3, 1.0f);
  CHECK(nn::mse_loss(y, y, g) == 0.0);
  for (float v : g) CHECK(v == 0.0f);
}

TEST_CASE("non-finite loss aborts training with the step index") {
  nn::DenseNet net(nn::mlp({1, 1}, Activation::identity, Activation::identity), 1);
  nn::OptimizerState opt(net);
  const std::vector<float> x{1.0f};
  const std::vector<float> y{std::numeric_limits<float>::quiet_NaN()};
  try {
    nn::train_step(net, opt, x, y);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.step == 1);
  }
}

TEST_CASE("optimizer moments mirror the parameter shapes") {
  const nn::DenseNet net(nn::mlp({3, 5, 2}, Activation::tanh, Activation::identity), 1);
  const nn::OptimizerState opt(net);
  REQUIRE(opt.first_moments().size() == 4);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(opt.first_moments()[2 * l].size() == net.layers()[l].weight.size());
    CHECK(opt.second_moments()[2 * l + 1].size() == net.layers()[l].bias.size());
  }
}

TEST_CASE("seeded training is bit-reproducible") {
  auto run = [] {
    nn::DenseNet net(nn::mlp({4, 8, 2}, Activation::tanh, Activation::identity), 21);
    nn::OptimizerState opt(net);
    const auto xs = random_vector(4 * 8, 3);
    const auto ys = random_vector(2 * 8, 4);
    for (int s = 0; s < 20; ++s) nn::train_step(net, opt, xs, ys);
    return net.checksum();
  };
  CHECK(run() == run());
}

TEST_CASE("frozen networks refuse mutable access") {
  nn::DenseNet net(nn::mlp({2, 2}, Activation::tanh, Activation::identity), 1);
  net.freeze();
  CHECK_THROWS_AS(net.mutable_layers(), ContractError);
}

TEST_CASE("parallel and serial row inference agree bit for bit") {
  const nn::DenseNet net(nn::mlp({8, 16, 4}, Activation::tanh, Activation::identity), 2);
  const auto rows = random_vector(8 * 37, 6);
  CHECK(nn::forward_rows_serial(net, rows) == nn::forward_rows_parallel(net, rows));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const nn::DenseNet net(nn::mlp({5, 6, 3}, Activation::relu, Activation::sigmoid), 17);
  std::stringstream ss;
  write_checkpoint(ss, net);
  const auto back = read_checkpoint(ss);
  CHECK(back.checksum() == net.checksum());
  CHECK(back.seed() == 17);
  CHECK(back.shapes().size() == 2);
  CHECK(back.layers()[1].activation == Activation::sigmoid);
}

TEST_CASE("checkpoint loading rejects truncated blobs and unknown versions") {
  const nn::DenseNet net(nn::mlp({3, 2}, Activation::tanh, Activation::identity), 1);
  std::stringstream ss;
  write_checkpoint(ss, net);
  std::string text = ss.str();
  {
    std::stringstream cut(text.substr(0, text.size() - 4));
    CHECK_THROWS_AS(read_checkpoint(cut), LoadError);
  }
  {
    std::string bad = text;
    bad.replace(bad.find("format_version 1"), 16, "format_version 9");
    std::stringstream in(bad);
    CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("version"), LoadError);
  }
}
