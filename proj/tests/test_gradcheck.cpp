#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "amqc/network.hpp"
#include "amqc/rng.hpp"
#include "amqc/train.hpp"

using namespace amqc;

namespace {

// Random desk-size network exercising every layer kind, plus an input to feed
// it. Kept small so the central-difference probes stay cheap in 64-bit.
struct Case {
  Network64 net;
  TensorT<double> input;
  int label = 0;
};

Case random_case(uint64_t seed) {
  Rng rng(seed);
  Case c;
  const size_t h = 8 + 2 * rng.below(4);   // 8..14
  const size_t w = 8 + 2 * rng.below(4);
  std::vector<size_t> filters = {2 + rng.below(3), 2 + rng.below(3)};
  c.net = make_cnn<double>(filters, 4, {1, h, w});
  init_params(c.net, derive_seed(seed, 1));
  c.input = TensorT<double>({1, h, w});
  for (auto& v : c.input.data) v = rng.unit();
  c.label = static_cast<int>(rng.below(4));
  return c;
}

}  // namespace

TEST_CASE("analytic gradients match central differences on 20 seeded networks") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Case c = random_case(seed);
    GradCheckOptions opts;
    opts.seed = seed;
    opts.coords = 60;
    double err = grad_check(c.net, c.input, c.label, opts);
    INFO("seed ", seed);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("grad check catches a planted conv-gradient bug") {
  Case c = random_case(7);
  GradCheckOptions opts;
  opts.seed = 7;
  opts.coords = 200;
  opts.tamper = [](GradsT<double>& g) {
    for (auto& v : g.weights[0].data) v *= 2.0;  // first conv layer
  };
  double err = grad_check(c.net, c.input, c.label, opts);
  CHECK(err > 1e-2);
}

TEST_CASE("grad check stays finite on a zero network and zero input") {
  Network64 net = make_cnn<double>({2, 2}, 4, {1, 8, 8});
  init_params(net, 1);
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : net.biases) std::fill(b.data.begin(), b.data.end(), 0.0);
  TensorT<double> input({1, 8, 8});

  double err = grad_check(net, input, 0);
  CHECK(std::isfinite(err));
}

TEST_CASE("grad check covers the tiny preset") {
  Network net32 = tiny_preset();
  Network64 net = convert_network<float, double>(net32);
  init_params(net, 77);
  Rng rng(78);
  TensorT<double> input({1, 80, 120});
  for (auto& v : input.data) v = rng.unit();

  GradCheckOptions opts;
  opts.seed = 79;
  opts.coords = 25;  // the acceptance run probes many more; keep this quick
  CHECK(grad_check(net, input, 2, opts) <= 1e-4);
}
