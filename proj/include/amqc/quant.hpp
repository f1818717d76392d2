#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "amqc/network.hpp"

namespace amqc {

// Activation quantization is asymmetric per-tensor uint8; weight quantization
// is symmetric per-output-channel int8. Rounding is half-away-from-zero
// throughout.
struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;  // in [0,255] for activations, 0 for weights

  bool operator==(const QuantParams&) const = default;
};

// (max-min)/255 with zero_point = round(-min/scale) clamped to [0,255];
// a degenerate range (max == min) maps to scale 1, zero_point 0.
QuantParams act_params_from_range(double min_v, double max_v);

uint8_t quantize_act(double x, const QuantParams& qp);
double dequantize_act(uint8_t q, const QuantParams& qp);

// Symmetric int8 for one output channel: scale = max|w|/127 (1.0 for an
// all-zero channel), q = round(w/scale) in [-127,127].
struct ChannelQuant {
  std::vector<int8_t> q;
  double scale = 1.0;
};
ChannelQuant quantize_channel(const float* w, size_t n);

struct Calibration {
  QuantParams input;
  std::vector<QuantParams> per_layer;            // output of layers[i]
  std::vector<std::pair<double, double>> range;  // observed (min,max) per layer
};

// Float forward over >= 16 samples, recording per-layer output min/max.
Calibration calibrate(const Network& net, const std::vector<Tensor>& samples);

// One quantized conv or dense layer. Weights are stored both as the int8
// contract values and widened to int16 for the GEMM kernels; biases live in
// the 32-bit integer accumulator scale s_in * s_w[channel].
struct QLayer {
  size_t out_channels = 0;
  size_t k = 0;                    // inner dot length
  std::vector<int8_t> w8;          // (out_channels, k) row-major
  std::vector<int16_t> w16;        // same values widened
  std::vector<double> w_scales;    // per output channel
  std::vector<int32_t> bias_q;
  std::vector<double> requant;     // accumulator -> next activation (or logit) scale
  int in_zp = 0;
  int out_zp = 0;
  bool dequant_output = false;     // final dense: emit float logits
};

struct QuantizedNetwork {
  std::array<size_t, 3> input_shape{1, 80, 120};
  size_t class_count = 4;
  std::vector<LayerSpec> layers;  // identical topology to the source network
  QuantParams input_qp;
  std::vector<QuantParams> act_qp;             // parallel to layers
  std::vector<QLayer> qlayers;                 // parallel to parameterized layers
  std::vector<std::array<uint8_t, 256>> luts;  // requant tables for relu/maxpool
  std::vector<int> lut_index;                  // per layer, -1 when unused

  bool ready() const { return !layers.empty() && act_qp.size() == layers.size(); }
};

QuantizedNetwork quantize_network(const Network& net, const Calibration& calib);

// Integer-dominant inference: uint8 activations, int16xint16->int32 GEMMs,
// per-channel requantization, float softmax at the end.
Tensor qforward(const QuantizedNetwork& qnet, const Tensor& batch);

// Fraction of samples where both paths pick the same top-1 class.
double top1_agreement(const Network& net, const QuantizedNetwork& qnet,
                      const std::vector<Tensor>& inputs);

// Zeroes the floor(fraction*N) smallest-|w| weights globally, ties broken by
// ascending flat index (weights only; biases untouched). Idempotent.
Network prune_magnitude(const Network& net, double fraction);

struct LatencyReport {
  std::string variant;  // "float" or "quantized"
  size_t batch_size = 1;
  double mean_ms = 0.0;  // per frame
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double fps = 0.0;  // exactly 1000 / mean_ms
  int threads = 1;
};

// Wall-clock forward-only timing: >= 10 discarded warm-up batches, then
// enough batches to cover `frames` frames (>= 100). Percentiles are
// nearest-rank over per-frame batch times.
LatencyReport bench_latency(const Network& net, size_t batch_size, size_t frames,
                            uint64_t seed = 7);
LatencyReport bench_latency(const QuantizedNetwork& qnet, size_t batch_size, size_t frames,
                            uint64_t seed = 7);

// Binary quantized-weights file: magic "AMQQ", u32 version = 1, then the
// topology, quantization parameters, and per-layer integer payloads. The
// int16 GEMM copies are rebuilt on load.
void save_qnetwork(const QuantizedNetwork& qnet, const std::string& path);
QuantizedNetwork load_qnetwork(const std::string& path);

// (base - now) / base * 100.
double reduction_pct(double base_ms, double new_ms);

// One JSON object: variant, batch_size, mean_ms, p50_ms, p95_ms, fps, threads.
std::string latency_report_json(const LatencyReport& r);

}  // namespace amqc
