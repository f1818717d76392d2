#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "amqc/datagen.hpp"
#include "amqc/network.hpp"

namespace amqc {

struct TrainConfig {
  double learning_rate = 0.01;
  size_t batch_size = 32;
  size_t epochs = 1;
  uint64_t seed = 0;
};

template <typename T>
struct DataSetT {
  std::vector<TensorT<T>> inputs;
  std::vector<int> labels;

  size_t size() const { return inputs.size(); }
};

using DataSet = DataSetT<float>;

template <typename T>
struct GradsT {
  std::vector<TensorT<T>> weights;
  std::vector<TensorT<T>> biases;

  void zero() {
    for (auto& t : weights) std::fill(t.data.begin(), t.data.end(), T(0));
    for (auto& t : biases) std::fill(t.data.begin(), t.data.end(), T(0));
  }
};

template <typename T>
GradsT<T> make_grads(const NetworkT<T>& net) {
  GradsT<T> g;
  for (const auto& w : net.weights) g.weights.emplace_back(w.shape);
  for (const auto& b : net.biases) g.biases.emplace_back(b.shape);
  return g;
}

template <typename T>
size_t argmax_index(const TensorT<T>& t) {
  size_t best = 0;
  for (size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

// Backprop through one traced sample, adding parameter gradients of the
// per-sample loss into `grads`. Returns that loss. The softmax/cross-entropy
// pair is differentiated jointly (dlogits = p - y).
template <typename T>
T backward_sample(const NetworkT<T>& net, const Trace<T>& trace, int label, GradsT<T>& grads) {
  if (trace.size() != net.layers.size() + 1)
    fail(ErrorKind::state, "backward_sample: trace does not cover the network");
  if (label < 0 || static_cast<size_t>(label) >= net.class_count)
    fail(ErrorKind::invalid_argument, "backward_sample: label out of range");
  if (net.layers.back().kind != LayerKind::softmax)
    fail(ErrorKind::state, "backward_sample: network must end in softmax");

  const TensorT<T>& prob = trace.back();
  TensorT<T> y(prob.shape);
  y[static_cast<size_t>(label)] = T(1);
  const T loss = cross_entropy(y, prob);

  // Gradient wrt the softmax input.
  TensorT<T> grad = prob;
  grad[static_cast<size_t>(label)] -= T(1);

  size_t slot = net.param_layer_count();
  for (size_t ii = net.layers.size() - 1; ii-- > 0;) {
    const LayerSpec& l = net.layers[ii];
    const TensorT<T>& x = trace[ii];
    switch (l.kind) {
      case LayerKind::dense: {
        --slot;
        const size_t M = net.weights[slot].dim(0), N = net.weights[slot].dim(1);
        TensorT<T> dx({N});
        for (size_t m = 0; m < M; ++m) {
          const T g = grad[m];
          T* dw = grads.weights[slot].data.data() + m * N;
          const T* w = net.weights[slot].data.data() + m * N;
          const T* xv = x.data.data();
          T* dxv = dx.data.data();
          for (size_t n = 0; n < N; ++n) {
            dw[n] += g * xv[n];
            dxv[n] += g * w[n];
          }
          grads.biases[slot][m] += g;
        }
        grad = std::move(dx);
        break;
      }
      case LayerKind::flatten:
        grad = grad.reshaped(x.shape);
        break;
      case LayerKind::relu: {
        for (size_t j = 0; j < grad.size(); ++j)
          if (x[j] <= T(0)) grad[j] = T(0);
        break;
      }
      case LayerKind::maxpool: {
        const size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
        const size_t OH = H / 2, OW = W / 2;
        TensorT<T> dx(x.shape);
        for (size_t c = 0; c < C; ++c) {
          const T* in = x.data.data() + c * H * W;
          const T* g = grad.data.data() + c * OH * OW;
          T* d = dx.data.data() + c * H * W;
          for (size_t yy = 0; yy < OH; ++yy)
            for (size_t xx = 0; xx < OW; ++xx) {
              // Route to the first maximum in window scan order.
              const size_t iy = 2 * yy, ix = 2 * xx;
              size_t best = iy * W + ix;
              const size_t cand[3] = {iy * W + ix + 1, (iy + 1) * W + ix, (iy + 1) * W + ix + 1};
              for (size_t k = 0; k < 3; ++k)
                if (in[cand[k]] > in[best]) best = cand[k];
              d[best] += g[yy * OW + xx];
            }
        }
        grad = std::move(dx);
        break;
      }
      case LayerKind::conv: {
        --slot;
        const size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
        const size_t F = net.weights[slot].dim(0);
        const size_t K = C * 9;
        const size_t S = H * W;
        std::vector<T> rows(S * K);
        im2row(x.data.data(), C, H, W, 3, 3, rows.data());
        std::vector<T> drows(S * K, T(0));
        for (size_t f = 0; f < F; ++f) {
          const T* gy = grad.data.data() + f * S;
          T* dw = grads.weights[slot].data.data() + f * K;
          const T* w = net.weights[slot].data.data() + f * K;
          T bsum = T(0);
          for (size_t s = 0; s < S; ++s) {
            const T g = gy[s];
            bsum += g;
            const T* row = rows.data() + s * K;
            T* drow = drows.data() + s * K;
            for (size_t k = 0; k < K; ++k) {
              dw[k] += g * row[k];
              drow[k] += g * w[k];
            }
          }
          grads.biases[slot][f] += bsum;
        }
        TensorT<T> dx(x.shape);
        row2im_add(drows.data(), C, H, W, 3, 3, dx.data.data());
        grad = std::move(dx);
        break;
      }
      case LayerKind::softmax:
        fail(ErrorKind::state, "backward_sample: softmax must be the final layer");
    }
  }
  return loss;
}

// One pass of mini-batch SGD over a seeded shuffle; w <- w - lr * d(mean batch
// loss)/dw. Bit-deterministic for fixed inputs. Returns the epoch-mean loss.
template <typename T>
T train_epoch(NetworkT<T>& net, const DataSetT<T>& data, const TrainConfig& cfg) {
  if (data.size() == 0) fail(ErrorKind::invalid_argument, "train_epoch: empty training set");
  if (data.labels.size() != data.inputs.size())
    fail(ErrorKind::invalid_argument, "train_epoch: inputs and labels differ in length");
  // lr = 0 is the degenerate no-update pass (gradients still evaluated).
  if (cfg.learning_rate < 0) fail(ErrorKind::invalid_argument, "train_epoch: learning_rate must be >= 0");
  if (cfg.batch_size < 1) fail(ErrorKind::invalid_argument, "train_epoch: batch_size must be >= 1");

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(cfg.seed);
  rng.shuffle(order);

  GradsT<T> grads = make_grads(net);
  Trace<T> trace;
  T loss_sum = T(0);
  const size_t batches = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  for (size_t b = 0; b < batches; ++b) {
    const size_t lo = b * cfg.batch_size;
    const size_t hi = std::min(lo + cfg.batch_size, data.size());
    grads.zero();
    T batch_loss = T(0);
    for (size_t i = lo; i < hi; ++i) {
      const size_t idx = order[i];
      forward_sample(net, data.inputs[idx], &trace);
      batch_loss += backward_sample(net, trace, data.labels[idx], grads);
    }
    if (!std::isfinite(static_cast<double>(batch_loss)))
      fail(ErrorKind::numeric, "train_epoch: non-finite loss in batch " + std::to_string(b));
    loss_sum += batch_loss;
    const T scale = static_cast<T>(cfg.learning_rate / static_cast<double>(hi - lo));
    for (size_t p = 0; p < net.weights.size(); ++p) {
      for (size_t j = 0; j < net.weights[p].size(); ++j)
        net.weights[p][j] -= scale * grads.weights[p][j];
      for (size_t j = 0; j < net.biases[p].size(); ++j)
        net.biases[p][j] -= scale * grads.biases[p][j];
    }
  }
  return loss_sum / static_cast<T>(data.size());
}

struct EpochStats {
  size_t epoch = 0;
  double mean_loss = 0.0;
};

// Multi-epoch driver; epoch e shuffles with derive_seed(cfg.seed, e).
template <typename T>
std::vector<EpochStats> train(NetworkT<T>& net, const DataSetT<T>& data, const TrainConfig& cfg,
                              const std::function<void(const EpochStats&)>& on_epoch = {}) {
  std::vector<EpochStats> out;
  for (size_t e = 0; e < cfg.epochs; ++e) {
    TrainConfig ecfg = cfg;
    ecfg.seed = derive_seed(cfg.seed, e);
    EpochStats st{e, static_cast<double>(train_epoch(net, data, ecfg))};
    if (on_epoch) on_epoch(st);
    out.push_back(st);
  }
  return out;
}

struct GradCheckOptions {
  uint64_t seed = 1;
  size_t coords = 50;  // parameter coordinates to probe (all, if fewer exist)
  double h = 1e-5;
  // Test hook: corrupt the analytic gradients before comparison, to prove the
  // check catches planted faults.
  std::function<void(GradsT<double>&)> tamper;
};

// Central-difference verification of the analytic gradients, 64-bit only.
// Returns max over probed coordinates of |a-n| / max(1e-8, |a|+|n|).
double grad_check(const Network64& net, const TensorT<double>& input, int label,
                  const GradCheckOptions& opts = {});

// Preprocesses every image in the set to the network input size.
DataSet to_dataset(const SampleSet& set, int target_h, int target_w);

}  // namespace amqc
