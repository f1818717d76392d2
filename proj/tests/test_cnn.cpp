#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "amqc/error.hpp"
#include "amqc/layers.hpp"
#include "amqc/network.hpp"
#include "amqc/rng.hpp"
#include "amqc/train.hpp"

using namespace amqc;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("amqc_cnn_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Tensor64 tensor1d(std::vector<double> v) {
  const size_t n = v.size();
  return Tensor64({n}, std::move(v));
}

}  // namespace

TEST_CASE("conv2d with a 1x1 scaling kernel doubles the input") {
  Tensor in({1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 1, 1}, {2});
  Tensor b({1}, {0});
  Tensor out = conv2d(in, w, b);
  REQUIRE(out.shape == std::vector<size_t>({1, 2, 2}));
  CHECK(out.data == std::vector<float>({2, 4, 6, 8}));
}

TEST_CASE("conv2d 3x3 ones kernel counts the padded neighborhood") {
  Tensor in({1, 3, 3}, std::vector<float>(9, 1.0f));
  Tensor w({1, 1, 3, 3}, std::vector<float>(9, 1.0f));
  Tensor b({1}, {0});
  Tensor out = conv2d(in, w, b);
  // Same-padded sums over 3x3 all-ones: corners 4, edges 6, center 9.
  CHECK(out.data == std::vector<float>({4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST_CASE("conv2d with zero weights emits the bias") {
  Tensor in({2, 4, 5});
  for (size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(i);
  Tensor w({3, 2, 3, 3});
  Tensor b({3}, {1.5f, -2.0f, 0.0f});
  Tensor out = conv2d(in, w, b);
  for (size_t f = 0; f < 3; ++f)
    for (size_t s = 0; s < 20; ++s) CHECK(out[f * 20 + s] == b[f]);
}

TEST_CASE("conv2d reports both shapes on mismatch") {
  Tensor in({2, 3, 3});
  Tensor w({1, 3, 3, 3});  // expects 3 input channels, gets 2
  Tensor b({1});
  try {
    conv2d(in, w, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
    std::string msg = e.what();
    CHECK(msg.find("(1,3,3,3)") != std::string::npos);
    CHECK(msg.find("(2,3,3)") != std::string::npos);
  }
}

TEST_CASE("relu clamps negatives and is idempotent") {
  Tensor t({3}, {-1, 0, 2});
  Tensor out = relu(t);
  CHECK(out.data == std::vector<float>({0, 0, 2}));
  CHECK(relu(out).data == out.data);

  Tensor pos({4}, {0.5f, 1, 2, 3});
  CHECK(relu(pos).data == pos.data);
}

TEST_CASE("maxpool2 takes window maxima and floors odd dims") {
  Tensor t({1, 2, 2}, {1, 2, 3, 4});
  Tensor out = maxpool2(t);
  REQUIRE(out.shape == std::vector<size_t>({1, 1, 1}));
  CHECK(out[0] == 4);

  Tensor odd({2, 5, 7});
  CHECK(maxpool2(odd).shape == std::vector<size_t>({2, 2, 3}));

  Tensor flat({1, 4, 4}, std::vector<float>(16, 3.25f));
  for (float v : maxpool2(flat).data) CHECK(v == 3.25f);

  Tensor tiny({1, 1, 4});
  CHECK_THROWS_AS(maxpool2(tiny), Error);
}

TEST_CASE("dense is the documented matrix-vector product") {
  Tensor in({2}, {1, 1});
  Tensor w({2, 2}, {1, 2, 3, 4});
  Tensor b({2}, {0, 0});
  CHECK(dense(in, w, b).data == std::vector<float>({3, 7}));

  Tensor id_w({2, 2}, {1, 0, 0, 1});
  CHECK(dense(in, id_w, b).data == in.data);

  Tensor zero({2}, {0, 0});
  Tensor bias({2}, {5, -3});
  CHECK(dense(zero, w, bias).data == bias.data);
}

TEST_CASE("softmax matches hand-computed values and is stable") {
  Tensor64 u = softmax(tensor1d({0, 0, 0, 0}));
  for (double v : u.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  Tensor64 big = softmax(tensor1d({1000, 0}));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(big[1] == doctest::Approx(0.0).scale(1).epsilon(1e-9));

  Tensor64 p = softmax(tensor1d({1, 2, 3}));
  CHECK(p[0] == doctest::Approx(0.090031).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.244728).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(0.665241).epsilon(1e-6));
}

TEST_CASE("softmax is shift invariant and normalized at extreme inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor64 z({4});
    for (auto& v : z.data) v = (rng.unit() - 0.5) * 2e4;
    Tensor64 p = softmax(z);
    double sum = 0;
    for (double v : p.data) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    Tensor64 shifted = z;
    const double c = (rng.unit() - 0.5) * 100.0;
    for (auto& v : shifted.data) v += c;
    Tensor64 q = softmax(shifted);
    for (size_t i = 0; i < 4; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }

  Tensor64 inf_in({2}, {std::numeric_limits<double>::infinity(), 0.0});
  CHECK_THROWS_AS(softmax(inf_in), Error);
}

TEST_CASE("cross_entropy evaluates -log of the true-class probability") {
  Tensor64 e0 = tensor1d({1, 0, 0, 0});
  CHECK(cross_entropy(e0, tensor1d({1, 0, 0, 0})) == 0.0);
  CHECK(cross_entropy(e0, tensor1d({0.25, 0.25, 0.25, 0.25})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-6));

  Tensor64 e1 = tensor1d({0, 1});
  CHECK(cross_entropy(e1, tensor1d({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // Nonnegative, and zero only at a post-clamp one-hot match.
  CHECK(cross_entropy(e0, tensor1d({0, 1, 0, 0})) > 0);
  CHECK(cross_entropy(e0, tensor1d({0.999, 0.001, 0, 0})) > 0);

  CHECK_THROWS_AS(cross_entropy(tensor1d({0.5, 0.5}), tensor1d({0.5, 0.5})), Error);
  CHECK_THROWS_AS(cross_entropy(tensor1d({1, 1}), tensor1d({0.5, 0.5})), Error);
}

TEST_CASE("forward_batch keeps rows independent and normalized") {
  Network net = tiny_preset();
  init_params(net, 3);

  Tensor batch({2, 1, 80, 120});
  Rng rng(8);
  for (size_t i = 0; i < batch.size() / 2; ++i)
    batch[i] = static_cast<float>(rng.unit());
  // Duplicate row 0 into row 1.
  std::copy_n(batch.data.data(), batch.size() / 2, batch.data.data() + batch.size() / 2);

  Tensor probs = forward_batch(net, batch);
  REQUIRE(probs.shape == std::vector<size_t>({2, 4}));
  float sum0 = 0, sum1 = 0;
  for (size_t i = 0; i < 4; ++i) {
    CHECK(probs[i] == probs[4 + i]);
    sum0 += probs[i];
    sum1 += probs[4 + i];
  }
  CHECK(sum0 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sum1 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("presets trace the documented spatial pyramid") {
  for (const char* name : {"full", "tiny"}) {
    Network net = make_preset(name);
    auto shapes = infer_shapes(net);
    const size_t f0 = net.layers[0].filters;
    REQUIRE(shapes[0] == std::vector<size_t>({f0, 80, 120}));
    // Pool outputs follow 80x120 -> 40x60 -> 20x30 -> 10x15 -> 5x7.
    std::vector<std::pair<size_t, size_t>> got;
    for (size_t i = 0; i < net.layers.size(); ++i)
      if (net.layers[i].kind == LayerKind::maxpool) got.push_back({shapes[i][1], shapes[i][2]});
    CHECK(got == std::vector<std::pair<size_t, size_t>>({{40, 60}, {20, 30}, {10, 15}, {5, 7}}));
    CHECK(shapes.back() == std::vector<size_t>({4}));
  }
  // Flatten widths: full 256*5*7 = 8960, tiny 16*5*7 = 560.
  auto flat_width = [](const Network& n) {
    auto shapes = infer_shapes(n);
    for (size_t i = 0; i < n.layers.size(); ++i)
      if (n.layers[i].kind == LayerKind::flatten) return shapes[i][0];
    return size_t{0};
  };
  CHECK(flat_width(full_preset()) == 8960);
  CHECK(flat_width(tiny_preset()) == 560);
  CHECK_THROWS_AS(make_preset("huge"), Error);
}

TEST_CASE("weights round-trip through the binary file exactly") {
  TempDir tmp;
  const std::string path = (tmp.path / "w.bin").string();

  Network net = tiny_preset();
  init_params(net, 17);
  save_weights(net, path);

  Network loaded = tiny_preset();
  load_weights(loaded, path);

  Tensor in({1, 80, 120});
  Rng rng(2);
  for (auto& v : in.data) v = static_cast<float>(rng.unit());
  Tensor a = forward_sample(net, in);
  Tensor b = forward_sample(loaded, in);
  CHECK(a.data == b.data);
}

TEST_CASE("weights loader rejects corrupted files") {
  TempDir tmp;
  const std::string path = (tmp.path / "w.bin").string();
  Network net = tiny_preset();
  init_params(net, 17);
  save_weights(net, path);

  auto slurp = [&] {
    std::ifstream f(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  auto spit = [&](const std::vector<char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  std::vector<char> good = slurp();

  std::vector<char> bad_magic = good;
  bad_magic[0] = 'X';
  bad_magic[1] = 'X';
  bad_magic[2] = 'X';
  bad_magic[3] = 'X';
  spit(bad_magic);
  Network victim = tiny_preset();
  CHECK_THROWS_AS(load_weights(victim, path), Error);

  std::vector<char> truncated(good.begin(), good.begin() + static_cast<long>(good.size() - 7));
  spit(truncated);
  try {
    Network v2 = tiny_preset();
    load_weights(v2, path);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }

  // Dimension mismatch: load tiny weights into the full topology.
  spit(good);
  Network wrong = full_preset();
  CHECK_THROWS_AS(load_weights(wrong, path), Error);
}

TEST_CASE("train_epoch is deterministic for a fixed seed") {
  SampleSet set = make_dataset(24, 4);
  DataSet data = to_dataset(set, 80, 120);

  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 8;
  cfg.seed = 9;

  Network a = tiny_preset(), b = tiny_preset();
  init_params(a, 5);
  init_params(b, 5);
  float la = train_epoch(a, data, cfg);
  float lb = train_epoch(b, data, cfg);
  CHECK(la == lb);
  for (size_t p = 0; p < a.weights.size(); ++p) {
    CHECK(a.weights[p].data == b.weights[p].data);
    CHECK(a.biases[p].data == b.biases[p].data);
  }
}

TEST_CASE("train_epoch memorizes a single sample") {
  SampleSet set = make_dataset(4, 20);
  DataSet data = to_dataset(set, 80, 120);
  DataSet one;
  one.inputs.push_back(data.inputs[0]);
  one.labels.push_back(data.labels[0]);

  Network net = tiny_preset();
  init_params(net, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 1;
  float loss = 0;
  for (int step = 0; step < 200; ++step) loss = train_epoch(net, one, cfg);
  CHECK(loss < 0.01f);
}

TEST_CASE("train_epoch with lr 0 leaves parameters untouched") {
  SampleSet set = make_dataset(8, 6);
  DataSet data = to_dataset(set, 80, 120);

  Network net = tiny_preset();
  init_params(net, 2);
  Network before = net;

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  float loss1 = train_epoch(net, data, cfg);
  for (size_t p = 0; p < net.weights.size(); ++p) {
    CHECK(net.weights[p].data == before.weights[p].data);
    CHECK(net.biases[p].data == before.biases[p].data);
  }
  float loss2 = train_epoch(net, data, cfg);
  CHECK(loss1 == loss2);  // same parameters, same loss

  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(train_epoch(net, data, cfg), Error);
}

TEST_CASE("train_epoch surfaces a non-finite loss as a numeric error") {
  SampleSet set = make_dataset(4, 30);
  DataSet data = to_dataset(set, 80, 120);

  Network net = tiny_preset();
  init_params(net, 3);
  // The logit bias feeds softmax unconditionally; a NaN conv weight would be
  // swallowed by relu's (x > 0) test instead.
  net.biases.back()[0] = std::numeric_limits<float>::quiet_NaN();

  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 4;
  try {
    train_epoch(net, data, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    // NaN parameters surface either as a non-finite batch loss or as a
    // non-finite softmax input, depending on where they first propagate.
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("train derives a distinct shuffle per epoch") {
  SampleSet set = make_dataset(16, 40);
  DataSet data = to_dataset(set, 80, 120);

  Network net = tiny_preset();
  init_params(net, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.seed = 42;

  std::vector<EpochStats> stats = train(net, data, cfg);
  REQUIRE(stats.size() == 3);
  for (size_t e = 0; e < 3; ++e) CHECK(stats[e].epoch == e);

  // Repeat run is bit-identical.
  Network net2 = tiny_preset();
  init_params(net2, 4);
  std::vector<EpochStats> stats2 = train(net2, data, cfg);
  for (size_t e = 0; e < 3; ++e) CHECK(stats[e].mean_loss == stats2[e].mean_loss);
  for (size_t p = 0; p < net.weights.size(); ++p)
    CHECK(net.weights[p].data == net2.weights[p].data);
}
