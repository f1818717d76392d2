#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "amqc/error.hpp"
#include "amqc/network.hpp"
#include "amqc/quant.hpp"
#include "amqc/rng.hpp"

using namespace amqc;

namespace {

// Small network and calibration set shared by the heavier cases below.
struct Fixture {
  Network net;
  std::vector<Tensor> samples;
  Calibration calib;
  QuantizedNetwork qnet;

  Fixture() {
    net = make_cnn<float>({4, 6}, 4, {1, 16, 20});
    init_params(net, 11);
    Rng rng(12);
    for (int i = 0; i < 24; ++i) {
      Tensor t({1, 16, 20});
      for (auto& v : t.data) v = static_cast<float>(rng.unit());
      samples.push_back(std::move(t));
    }
    calib = calibrate(net, samples);
    qnet = quantize_network(net, calib);
  }
};

}  // namespace

TEST_CASE("activation params follow the min-max formulas") {
  QuantParams q = act_params_from_range(-1.0, 1.0);
  CHECK(q.scale == doctest::Approx(2.0 / 255.0).epsilon(1e-12));
  CHECK(q.zero_point == 128);  // round(127.5) half-away-from-zero

  q = act_params_from_range(0.0, 1.0);
  CHECK(q.scale == doctest::Approx(1.0 / 255.0).epsilon(1e-12));
  CHECK(q.zero_point == 0);

  q = act_params_from_range(0.5, 0.5);  // degenerate range
  CHECK(q.scale == 1.0);
  CHECK(q.zero_point == 0);

  CHECK_THROWS_AS(act_params_from_range(1.0, -1.0), Error);
}

TEST_CASE("activation quantization round-trips within scale/2") {
  QuantParams qp = act_params_from_range(-0.75, 1.25);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    double x = -0.75 + 2.0 * rng.unit();
    uint8_t q = quantize_act(x, qp);
    CHECK(std::abs(dequantize_act(q, qp) - x) <= qp.scale / 2 + 1e-12);
  }
}

TEST_CASE("channel weights quantize symmetrically per the formula") {
  float w[3] = {-0.5f, 0.25f, 0.5f};
  ChannelQuant cq = quantize_channel(w, 3);
  CHECK(cq.scale == doctest::Approx(0.5 / 127.0).epsilon(1e-12));
  REQUIRE(cq.q.size() == 3);
  CHECK(cq.q[0] == -127);
  CHECK(cq.q[1] == 64);  // 63.5 rounds half-away-from-zero
  CHECK(cq.q[2] == 127);

  float zeros[4] = {0, 0, 0, 0};
  ChannelQuant zq = quantize_channel(zeros, 4);
  CHECK(zq.scale > 0);
  for (int8_t v : zq.q) CHECK(v == 0);
}

TEST_CASE("weight dequantization error is bounded by scale/2") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> w(64);
    for (auto& v : w) v = static_cast<float>((rng.unit() - 0.5) * 4.0);
    ChannelQuant cq = quantize_channel(w.data(), w.size());
    for (size_t i = 0; i < w.size(); ++i) {
      double back = cq.q[i] * cq.scale;
      CHECK(std::abs(back - w[i]) <= cq.scale / 2 + 1e-9);
    }
  }
}

TEST_CASE("calibrate requires at least 16 samples") {
  Network net = make_cnn<float>({2}, 4, {1, 8, 8});
  init_params(net, 1);
  std::vector<Tensor> few(3, Tensor({1, 8, 8}));
  CHECK_THROWS_AS(calibrate(net, few), Error);
  CHECK_THROWS_AS(calibrate(net, {}), Error);
}

TEST_CASE("quantized network preserves topology and weight bounds") {
  Fixture fx;
  CHECK(fx.qnet.layers == fx.net.layers);
  CHECK(fx.qnet.input_shape == fx.net.input_shape);
  for (const QLayer& ql : fx.qnet.qlayers)
    for (int8_t v : ql.w8) {
      CHECK(v >= -127);
      CHECK(v <= 127);
    }
}

TEST_CASE("qforward tracks the float path on an all-zero input") {
  Fixture fx;
  Tensor zero({1, 1, 16, 20});
  Tensor qp = qforward(fx.qnet, zero);
  Tensor fp = forward_batch(fx.net, zero);
  REQUIRE(qp.shape == fp.shape);
  for (size_t i = 0; i < 4; ++i) CHECK(std::abs(qp[i] - fp[i]) <= 0.02);
}

TEST_CASE("qforward rows are normalized") {
  Fixture fx;
  Tensor batch({3, 1, 16, 20});
  Rng rng(9);
  for (auto& v : batch.data) v = static_cast<float>(rng.unit());
  Tensor probs = qforward(fx.qnet, batch);
  REQUIRE(probs.shape == std::vector<size_t>({3, 4}));
  for (size_t b = 0; b < 3; ++b) {
    float sum = 0;
    for (size_t i = 0; i < 4; ++i) sum += probs[b * 4 + i];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("qforward refuses an unquantized network") {
  QuantizedNetwork empty;
  Tensor batch({1, 1, 16, 20});
  CHECK_THROWS_AS(qforward(empty, batch), Error);
}

TEST_CASE("top-1 agreement is high on in-distribution inputs") {
  Fixture fx;
  double agree = top1_agreement(fx.net, fx.qnet, fx.samples);
  CHECK(agree >= 0.9);  // acceptance pins >= 0.99 on the real model
  CHECK(agree <= 1.0);
}

TEST_CASE("prune_magnitude zeroes the smallest weights globally") {
  Network net = make_cnn<float>({1}, 4, {1, 8, 8});
  init_params(net, 1);

  Network keep = prune_magnitude(net, 0.0);
  for (size_t p = 0; p < net.weights.size(); ++p)
    CHECK(keep.weights[p].data == net.weights[p].data);

  Network gone = prune_magnitude(net, 1.0);
  for (const auto& w : gone.weights)
    for (float v : w.data) CHECK(v == 0.0f);
  for (size_t p = 0; p < net.biases.size(); ++p)
    CHECK(gone.biases[p].data == net.biases[p].data);

  // Hand-checkable case: the two smallest of four weights go to zero.
  Network small;
  small.layers = {LayerSpec::dense(4), LayerSpec::softmax()};
  small.weights.push_back(Tensor({4}, {0.1f, -0.5f, 0.2f, 0.9f}));
  small.biases.push_back(Tensor({4}));
  Network pruned = prune_magnitude(small, 0.5);
  CHECK(pruned.weights[0].data == std::vector<float>({0, -0.5f, 0, 0.9f}));

  Network again = prune_magnitude(pruned, 0.5);
  CHECK(again.weights[0].data == pruned.weights[0].data);

  CHECK_THROWS_AS(prune_magnitude(net, -0.1), Error);
  CHECK_THROWS_AS(prune_magnitude(net, 1.1), Error);
}

TEST_CASE("latency report is internally consistent") {
  Fixture fx;
  LatencyReport r = bench_latency(fx.net, 4, 100);
  CHECK(r.variant == "float");
  CHECK(r.batch_size == 4);
  CHECK(r.mean_ms > 0);
  CHECK(std::abs(r.fps - 1000.0 / r.mean_ms) <= 1e-9);
  CHECK(std::abs(r.fps * r.mean_ms - 1000.0) <= 1e-6);
  CHECK(r.p50_ms <= r.p95_ms);
  CHECK(r.threads == 1);

  LatencyReport q = bench_latency(fx.qnet, 4, 100);
  CHECK(q.variant == "quantized");

  CHECK_THROWS_AS(bench_latency(fx.net, 4, 99), Error);
}

TEST_CASE("reduction_pct computes the documented percentage") {
  CHECK(reduction_pct(32.4, 17.2) == doctest::Approx(46.9).epsilon(1e-3));
  CHECK(reduction_pct(100.0, 100.0) == 0.0);
  CHECK(reduction_pct(10.0, 20.0) == -100.0);
}

TEST_CASE("latency JSON carries the documented keys") {
  LatencyReport r;
  r.variant = "float";
  r.batch_size = 32;
  r.mean_ms = 10.0;
  r.p50_ms = 9.5;
  r.p95_ms = 12.0;
  r.fps = 100.0;
  std::string line = latency_report_json(r);
  for (const char* key : {"\"variant\"", "\"batch_size\"", "\"mean_ms\"", "\"p50_ms\"",
                          "\"p95_ms\"", "\"fps\"", "\"threads\""})
    CHECK(line.find(key) != std::string::npos);
  CHECK(latency_report_json(r) == line);  // deterministic
}

TEST_CASE("quantized network round-trips through its file format") {
  Fixture fx;
  auto path = std::filesystem::temp_directory_path() /
              ("amqc_q8_" + std::to_string(::getpid()) + ".bin");
  save_qnetwork(fx.qnet, path.string());

  QuantizedNetwork back = load_qnetwork(path.string());
  CHECK(back.layers == fx.qnet.layers);
  CHECK(back.input_qp == fx.qnet.input_qp);

  Tensor batch({2, 1, 16, 20});
  Rng rng(31);
  for (auto& v : batch.data) v = static_cast<float>(rng.unit());
  Tensor a = qforward(fx.qnet, batch);
  Tensor b = qforward(back, batch);
  CHECK(a.data == b.data);

  // Corrupt the magic and expect a format error.
  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(0);
  f.write("ZZZZ", 4);
  f.close();
  CHECK_THROWS_AS(load_qnetwork(path.string()), Error);

  std::filesystem::remove(path);
}
