#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "amqc/layers.hpp"
#include "amqc/rng.hpp"
#include "amqc/tensor.hpp"

namespace amqc {

enum class LayerKind : uint8_t {
  conv = 1,
  relu = 2,
  maxpool = 3,
  flatten = 4,
  dense = 5,
  softmax = 6,
};

const char* layer_kind_name(LayerKind kind);

// All convolutions in a network are 3x3, stride 1, zero same-padded; pooling
// is fixed 2x2/2. Only `filters` (conv) and `units` (dense) vary.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  size_t filters = 0;
  size_t units = 0;

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv(size_t filters) { return {LayerKind::conv, filters, 0}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec maxpool() { return {LayerKind::maxpool, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0}; }
  static LayerSpec dense(size_t units) { return {LayerKind::dense, 0, units}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0}; }
};

// Weights/biases run parallel to the parameterized (conv/dense) layers in
// order; param_slot() maps a layer index to its position in those vectors.
template <typename T>
struct NetworkT {
  std::array<size_t, 3> input_shape{1, 80, 120};
  size_t class_count = 4;
  std::vector<LayerSpec> layers;
  std::vector<TensorT<T>> weights;
  std::vector<TensorT<T>> biases;

  size_t param_slot(size_t layer_index) const {
    size_t slot = 0;
    for (size_t i = 0; i < layer_index; ++i)
      if (layers[i].kind == LayerKind::conv || layers[i].kind == LayerKind::dense) ++slot;
    return slot;
  }
  size_t param_layer_count() const {
    size_t n = 0;
    for (const auto& l : layers)
      if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) ++n;
    return n;
  }
};

using Network = NetworkT<float>;
using Network64 = NetworkT<double>;

// conv(f0) -> relu -> pool, repeated, with pooling omitted after the last
// conv; then flatten -> dense(k) -> softmax.
template <typename T>
NetworkT<T> make_cnn(const std::vector<size_t>& conv_filters, size_t dense_units,
                     std::array<size_t, 3> input_shape) {
  if (conv_filters.empty()) fail(ErrorKind::invalid_argument, "make_cnn: no conv layers");
  NetworkT<T> net;
  net.input_shape = input_shape;
  net.class_count = dense_units;
  for (size_t i = 0; i < conv_filters.size(); ++i) {
    if (conv_filters[i] == 0) fail(ErrorKind::invalid_argument, "make_cnn: zero filter count");
    net.layers.push_back(LayerSpec::conv(conv_filters[i]));
    net.layers.push_back(LayerSpec::relu());
    if (i + 1 < conv_filters.size()) net.layers.push_back(LayerSpec::maxpool());
  }
  net.layers.push_back(LayerSpec::flatten());
  net.layers.push_back(LayerSpec::dense(dense_units));
  net.layers.push_back(LayerSpec::softmax());
  return net;
}

// Canonical 80x120 classifier: 32-64-512-512-256 filters, dense 4. Spatial
// trace 80x120 -> 40x60 -> 20x30 -> 10x15 -> 5x7.
Network full_preset();
// Desk-scale stand-in: 8-16-16-16-16 filters, dense 4, same topology.
Network tiny_preset();

Network make_preset(const std::string& name);

// Per-layer output shapes (validated); index i is the output of layers[i].
// Shape problems report the offending layer index and kind.
template <typename T>
std::vector<std::vector<size_t>> infer_shapes(const NetworkT<T>& net);

// He-style init: weights ~ N(0, 2/fan_in), biases zero. Allocates the
// parameter tensors; layer shapes must already be consistent.
template <typename T>
void init_params(NetworkT<T>& net, uint64_t seed);

// Per-layer activations: trace[0] is the input, trace[i+1] the output of
// layers[i]. Used by the backward pass and by quantization calibration.
template <typename T>
using Trace = std::vector<TensorT<T>>;

template <typename T>
TensorT<T> forward_sample(const NetworkT<T>& net, const TensorT<T>& input, Trace<T>* trace = nullptr);

// batch (B,C,H,W) -> probabilities (B,k); rows are independent.
template <typename T>
TensorT<T> forward_batch(const NetworkT<T>& net, const TensorT<T>& batch);

// Binary weights file: magic "AMQC", u32 version = 1, u32 parameterized layer
// count, then per such layer: u8 kind tag, then weights and bias tensors,
// each as u32 dim count + u32 dims + raw little-endian f32 payload.
void save_weights(const Network& net, const std::string& path);
// Fills the parameters of an already-built architecture; kind tags and tensor
// dims must match the network's specs.
void load_weights(Network& net, const std::string& path);

template <typename T, typename U>
NetworkT<U> convert_network(const NetworkT<T>& src) {
  NetworkT<U> out;
  out.input_shape = src.input_shape;
  out.class_count = src.class_count;
  out.layers = src.layers;
  for (const auto& w : src.weights) {
    TensorT<U> t(w.shape);
    for (size_t i = 0; i < w.size(); ++i) t[i] = static_cast<U>(w[i]);
    out.weights.push_back(std::move(t));
  }
  for (const auto& b : src.biases) {
    TensorT<U> t(b.shape);
    for (size_t i = 0; i < b.size(); ++i) t[i] = static_cast<U>(b[i]);
    out.biases.push_back(std::move(t));
  }
  return out;
}

// ---- template implementations ----

namespace detail {

[[noreturn]] inline void layer_fail(ErrorKind kind, size_t index, LayerKind lk, const std::string& msg) {
  fail(kind, "layer " + std::to_string(index) + " (" + layer_kind_name(lk) + "): " + msg);
}

}  // namespace detail

template <typename T>
std::vector<std::vector<size_t>> infer_shapes(const NetworkT<T>& net) {
  std::vector<std::vector<size_t>> out;
  std::vector<size_t> cur(net.input_shape.begin(), net.input_shape.end());
  if (net.layers.empty()) fail(ErrorKind::shape, "network has no layers");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
        if (cur.size() != 3)
          detail::layer_fail(ErrorKind::shape, i, l.kind, "expects a (C,H,W) input");
        cur[0] = l.filters;
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool:
        if (cur.size() != 3)
          detail::layer_fail(ErrorKind::shape, i, l.kind, "expects a (C,H,W) input");
        if (cur[1] < 2 || cur[2] < 2)
          detail::layer_fail(ErrorKind::shape, i, l.kind,
                             "spatial dims " + std::to_string(cur[1]) + "x" + std::to_string(cur[2]) +
                                 " too small to pool");
        cur[1] /= 2;
        cur[2] /= 2;
        break;
      case LayerKind::flatten: {
        size_t n = 1;
        for (size_t d : cur) n *= d;
        cur = {n};
        break;
      }
      case LayerKind::dense:
        if (cur.size() != 1)
          detail::layer_fail(ErrorKind::shape, i, l.kind, "expects a flattened input");
        cur = {l.units};
        break;
      case LayerKind::softmax:
        if (cur.size() != 1)
          detail::layer_fail(ErrorKind::shape, i, l.kind, "expects a flattened input");
        break;
    }
    out.push_back(cur);
  }
  if (net.layers.back().kind != LayerKind::softmax || out.back() != std::vector<size_t>{net.class_count})
    fail(ErrorKind::shape, "network must end in softmax over " + std::to_string(net.class_count) +
                               " classes");
  return out;
}

template <typename T>
void init_params(NetworkT<T>& net, uint64_t seed) {
  const auto shapes = infer_shapes(net);
  net.weights.clear();
  net.biases.clear();
  Rng rng(seed);
  std::vector<size_t> cur(net.input_shape.begin(), net.input_shape.end());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::conv) {
      const size_t c = cur[0];
      TensorT<T> w({l.filters, c, 3, 3});
      const double std_dev = std::sqrt(2.0 / static_cast<double>(c * 9));
      for (auto& v : w.data) v = static_cast<T>(rng.gaussian() * std_dev);
      net.weights.push_back(std::move(w));
      net.biases.push_back(TensorT<T>({l.filters}));
    } else if (l.kind == LayerKind::dense) {
      const size_t n = cur[0];
      TensorT<T> w({l.units, n});
      const double std_dev = std::sqrt(2.0 / static_cast<double>(n));
      for (auto& v : w.data) v = static_cast<T>(rng.gaussian() * std_dev);
      net.weights.push_back(std::move(w));
      net.biases.push_back(TensorT<T>({l.units}));
    }
    cur = shapes[i];
  }
}

template <typename T>
TensorT<T> forward_sample(const NetworkT<T>& net, const TensorT<T>& input, Trace<T>* trace) {
  if (net.weights.size() != net.param_layer_count())
    fail(ErrorKind::state, "network parameters not initialized");
  std::vector<size_t> want(net.input_shape.begin(), net.input_shape.end());
  if (input.shape != want)
    fail(ErrorKind::shape,
         "input " + input.shape_str() + " does not match network input (" +
             std::to_string(want[0]) + "," + std::to_string(want[1]) + "," + std::to_string(want[2]) + ")");

  TensorT<T> cur = input;
  if (trace) {
    trace->clear();
    trace->push_back(cur);
  }
  size_t slot = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    try {
      switch (l.kind) {
        case LayerKind::conv:
          cur = conv2d(cur, net.weights[slot], net.biases[slot]);
          ++slot;
          break;
        case LayerKind::relu:
          cur = relu(cur);
          break;
        case LayerKind::maxpool:
          cur = maxpool2(cur);
          break;
        case LayerKind::flatten:
          cur = cur.reshaped({cur.size()});
          break;
        case LayerKind::dense:
          cur = dense(cur, net.weights[slot], net.biases[slot]);
          ++slot;
          break;
        case LayerKind::softmax:
          cur = softmax(cur);
          break;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::shape)
        detail::layer_fail(ErrorKind::shape, i, l.kind, e.what());
      throw;
    }
    if (trace) trace->push_back(cur);
  }
  return cur;
}

template <typename T>
TensorT<T> forward_batch(const NetworkT<T>& net, const TensorT<T>& batch) {
  if (batch.rank() != 4)
    fail(ErrorKind::shape, "batch must be (B,C,H,W), got " + batch.shape_str());
  const size_t B = batch.dim(0);
  if (B == 0) fail(ErrorKind::shape, "empty batch");
  const size_t per = batch.size() / B;
  TensorT<T> sample({batch.dim(1), batch.dim(2), batch.dim(3)});
  TensorT<T> out({B, net.class_count});
  for (size_t b = 0; b < B; ++b) {
    std::copy_n(batch.data.data() + b * per, per, sample.data.data());
    TensorT<T> p = forward_sample(net, sample);
    std::copy_n(p.data.data(), net.class_count, out.data.data() + b * net.class_count);
  }
  return out;
}

}  // namespace amqc
