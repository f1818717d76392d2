#include "amqc/quant.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "amqc/bytes.hpp"
#include "amqc/gemm.hpp"

namespace amqc {

QuantParams act_params_from_range(double min_v, double max_v) {
  if (!(min_v <= max_v)) fail(ErrorKind::invalid_argument, "activation range with min > max");
  if (min_v == max_v) return {1.0, 0};
  QuantParams qp;
  qp.scale = (max_v - min_v) / 255.0;
  qp.zero_point =
      static_cast<int>(std::clamp<long long>(std::llround(-min_v / qp.scale), 0, 255));
  return qp;
}

uint8_t quantize_act(double x, const QuantParams& qp) {
  const long long q = std::llround(x / qp.scale) + qp.zero_point;
  return static_cast<uint8_t>(std::clamp<long long>(q, 0, 255));
}

double dequantize_act(uint8_t q, const QuantParams& qp) {
  return (static_cast<int>(q) - qp.zero_point) * qp.scale;
}

ChannelQuant quantize_channel(const float* w, size_t n) {
  double amax = 0.0;
  for (size_t i = 0; i < n; ++i) amax = std::max(amax, std::abs(static_cast<double>(w[i])));
  ChannelQuant cq;
  cq.scale = amax > 0.0 ? amax / 127.0 : 1.0;
  cq.q.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const long long q = std::llround(static_cast<double>(w[i]) / cq.scale);
    cq.q[i] = static_cast<int8_t>(std::clamp<long long>(q, -127, 127));
  }
  return cq;
}

Calibration calibrate(const Network& net, const std::vector<Tensor>& samples) {
  if (samples.empty()) fail(ErrorKind::invalid_argument, "calibrate: empty calibration set");
  if (samples.size() < 16)
    fail(ErrorKind::invalid_argument, "calibrate: needs at least 16 samples, got " +
                                          std::to_string(samples.size()));
  const size_t L = net.layers.size();
  std::vector<double> lo(L + 1, 0.0), hi(L + 1, 0.0);
  bool first = true;
  Trace<float> trace;
  for (const auto& s : samples) {
    forward_sample(net, s, &trace);
    for (size_t i = 0; i <= L; ++i) {
      const auto& t = trace[i];
      const auto [mn, mx] = std::minmax_element(t.data.begin(), t.data.end());
      if (first) {
        lo[i] = *mn;
        hi[i] = *mx;
      } else {
        lo[i] = std::min(lo[i], static_cast<double>(*mn));
        hi[i] = std::max(hi[i], static_cast<double>(*mx));
      }
    }
    first = false;
  }
  Calibration c;
  c.input = act_params_from_range(lo[0], hi[0]);
  for (size_t i = 0; i < L; ++i) {
    c.per_layer.push_back(act_params_from_range(lo[i + 1], hi[i + 1]));
    c.range.emplace_back(lo[i + 1], hi[i + 1]);
  }
  return c;
}

namespace {

uint8_t requant_u8(double real, const QuantParams& qp) {
  const long long q = std::llround(real / qp.scale) + qp.zero_point;
  return static_cast<uint8_t>(std::clamp<long long>(q, 0, 255));
}

std::array<uint8_t, 256> make_lut(const QuantParams& in, const QuantParams& out, bool is_relu) {
  std::array<uint8_t, 256> lut{};
  for (int q = 0; q < 256; ++q) {
    double real = (q - in.zero_point) * in.scale;
    if (is_relu) real = std::max(0.0, real);
    lut[static_cast<size_t>(q)] = requant_u8(real, out);
  }
  return lut;
}

// im2row over a uint8 activation plane, emitting zero-point-centred int16
// values (padding contributes 0, i.e. the dequantized zero).
void im2row_q(const uint8_t* input, size_t C, size_t H, size_t W, int zp, int16_t* rows) {
  const size_t K = C * 9;
  for (size_t oy = 0; oy < H; ++oy) {
    for (size_t ox = 0; ox < W; ++ox) {
      int16_t* row = rows + (oy * W + ox) * K;
      size_t k = 0;
      for (size_t c = 0; c < C; ++c) {
        const uint8_t* plane = input + c * H * W;
        for (size_t dy = 0; dy < 3; ++dy) {
          const int iy = static_cast<int>(oy + dy) - 1;
          if (iy < 0 || iy >= static_cast<int>(H)) {
            row[k++] = 0;
            row[k++] = 0;
            row[k++] = 0;
            continue;
          }
          for (size_t dx = 0; dx < 3; ++dx) {
            const int ix = static_cast<int>(ox + dx) - 1;
            row[k++] = (ix < 0 || ix >= static_cast<int>(W))
                           ? int16_t{0}
                           : static_cast<int16_t>(static_cast<int>(plane[iy * W + ix]) - zp);
          }
        }
      }
    }
  }
}

}  // namespace

QuantizedNetwork quantize_network(const Network& net, const Calibration& calib) {
  if (net.weights.size() != net.param_layer_count())
    fail(ErrorKind::state, "quantize_network: network parameters not initialized");
  if (calib.per_layer.size() != net.layers.size())
    fail(ErrorKind::state, "quantize_network: calibration does not cover the network");
  const auto shapes = infer_shapes(net);

  QuantizedNetwork q;
  q.input_shape = net.input_shape;
  q.class_count = net.class_count;
  q.layers = net.layers;
  q.input_qp = calib.input;
  q.act_qp = calib.per_layer;
  q.lut_index.assign(net.layers.size(), -1);

  std::vector<size_t> cur(net.input_shape.begin(), net.input_shape.end());
  size_t slot = 0;
  bool seen_dense = false;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const QuantParams in_qp = i == 0 ? q.input_qp : q.act_qp[i - 1];
    const QuantParams out_qp = q.act_qp[i];
    switch (l.kind) {
      case LayerKind::conv: {
        if (seen_dense) fail(ErrorKind::state, "quantize_network: conv after dense unsupported");
        QLayer ql;
        ql.out_channels = l.filters;
        ql.k = cur[0] * 9;
        ql.in_zp = in_qp.zero_point;
        ql.out_zp = out_qp.zero_point;
        ql.w8.resize(ql.out_channels * ql.k);
        ql.w16.resize(ql.out_channels * ql.k);
        for (size_t f = 0; f < ql.out_channels; ++f) {
          ChannelQuant cq = quantize_channel(net.weights[slot].data.data() + f * ql.k, ql.k);
          std::copy(cq.q.begin(), cq.q.end(), ql.w8.begin() + static_cast<ptrdiff_t>(f * ql.k));
          for (size_t j = 0; j < ql.k; ++j) ql.w16[f * ql.k + j] = cq.q[j];
          ql.w_scales.push_back(cq.scale);
          const double acc_scale = in_qp.scale * cq.scale;
          ql.bias_q.push_back(static_cast<int32_t>(
              std::llround(static_cast<double>(net.biases[slot][f]) / acc_scale)));
          ql.requant.push_back(acc_scale / out_qp.scale);
        }
        q.qlayers.push_back(std::move(ql));
        ++slot;
        break;
      }
      case LayerKind::dense: {
        QLayer ql;
        ql.out_channels = l.units;
        ql.k = cur[0];
        ql.in_zp = in_qp.zero_point;
        ql.out_zp = 0;
        ql.dequant_output = true;
        ql.w8.resize(ql.out_channels * ql.k);
        ql.w16.resize(ql.out_channels * ql.k);
        for (size_t m = 0; m < ql.out_channels; ++m) {
          ChannelQuant cq = quantize_channel(net.weights[slot].data.data() + m * ql.k, ql.k);
          std::copy(cq.q.begin(), cq.q.end(), ql.w8.begin() + static_cast<ptrdiff_t>(m * ql.k));
          for (size_t j = 0; j < ql.k; ++j) ql.w16[m * ql.k + j] = cq.q[j];
          ql.w_scales.push_back(cq.scale);
          const double acc_scale = in_qp.scale * cq.scale;
          ql.bias_q.push_back(static_cast<int32_t>(
              std::llround(static_cast<double>(net.biases[slot][m]) / acc_scale)));
          ql.requant.push_back(acc_scale);  // straight to float logits
        }
        q.qlayers.push_back(std::move(ql));
        ++slot;
        seen_dense = true;
        break;
      }
      case LayerKind::relu:
      case LayerKind::maxpool:
        q.lut_index[i] = static_cast<int>(q.luts.size());
        q.luts.push_back(make_lut(in_qp, out_qp, l.kind == LayerKind::relu));
        break;
      case LayerKind::flatten:
      case LayerKind::softmax:
        break;
    }
    cur = shapes[i];
  }
  return q;
}

namespace {

Tensor qforward_sample(const QuantizedNetwork& qn, const float* x, size_t n) {
  std::vector<size_t> cur(qn.input_shape.begin(), qn.input_shape.end());
  std::vector<uint8_t> act(n);
  for (size_t i = 0; i < n; ++i) act[i] = quantize_act(x[i], qn.input_qp);

  std::vector<uint8_t> next;
  std::vector<int16_t> rows;
  std::vector<int32_t> acc;
  std::vector<float> logits;
  size_t slot = 0;
  bool in_float = false;
  for (size_t i = 0; i < qn.layers.size(); ++i) {
    const LayerSpec& l = qn.layers[i];
    switch (l.kind) {
      case LayerKind::conv: {
        const QLayer& ql = qn.qlayers[slot++];
        const size_t C = cur[0], H = cur[1], W = cur[2];
        const size_t S = H * W, F = ql.out_channels;
        rows.resize(S * ql.k);
        im2row_q(act.data(), C, H, W, ql.in_zp, rows.data());
        acc.resize(F * S);
        gemm_rowdot_i16(ql.w16.data(), rows.data(), acc.data(), F, S, ql.k);
        next.resize(F * S);
        for (size_t f = 0; f < F; ++f) {
          const double m = ql.requant[f];
          const int32_t b = ql.bias_q[f];
          const int32_t* a = acc.data() + f * S;
          uint8_t* o = next.data() + f * S;
          for (size_t s = 0; s < S; ++s) {
            const long long v = std::llround((a[s] + b) * m) + ql.out_zp;
            o[s] = static_cast<uint8_t>(std::clamp<long long>(v, 0, 255));
          }
        }
        act.swap(next);
        cur = {F, H, W};
        break;
      }
      case LayerKind::relu: {
        const auto& lut = qn.luts[static_cast<size_t>(qn.lut_index[i])];
        for (auto& v : act) v = lut[v];
        break;
      }
      case LayerKind::maxpool: {
        const auto& lut = qn.luts[static_cast<size_t>(qn.lut_index[i])];
        const size_t C = cur[0], H = cur[1], W = cur[2];
        const size_t OH = H / 2, OW = W / 2;
        next.resize(C * OH * OW);
        for (size_t c = 0; c < C; ++c) {
          const uint8_t* in = act.data() + c * H * W;
          uint8_t* o = next.data() + c * OH * OW;
          for (size_t y = 0; y < OH; ++y)
            for (size_t xx = 0; xx < OW; ++xx) {
              const size_t iy = 2 * y, ix = 2 * xx;
              const uint8_t m = std::max(std::max(in[iy * W + ix], in[iy * W + ix + 1]),
                                         std::max(in[(iy + 1) * W + ix], in[(iy + 1) * W + ix + 1]));
              o[y * OW + xx] = lut[m];
            }
        }
        act.swap(next);
        cur = {C, OH, OW};
        break;
      }
      case LayerKind::flatten: {
        size_t total = 1;
        for (size_t d : cur) total *= d;
        cur = {total};
        break;
      }
      case LayerKind::dense: {
        const QLayer& ql = qn.qlayers[slot++];
        const size_t K = ql.k, M = ql.out_channels;
        rows.resize(K);
        for (size_t j = 0; j < K; ++j)
          rows[j] = static_cast<int16_t>(static_cast<int>(act[j]) - ql.in_zp);
        acc.resize(M);
        gemm_rowdot_i16(ql.w16.data(), rows.data(), acc.data(), M, 1, K);
        logits.resize(M);
        for (size_t m = 0; m < M; ++m)
          logits[m] = static_cast<float>((acc[m] + ql.bias_q[m]) * ql.requant[m]);
        in_float = true;
        cur = {M};
        break;
      }
      case LayerKind::softmax: {
        if (!in_float) fail(ErrorKind::state, "qforward: softmax before dense");
        Tensor z({logits.size()});
        std::copy(logits.begin(), logits.end(), z.data.begin());
        return softmax(z);
      }
    }
  }
  fail(ErrorKind::state, "qforward: network did not end in softmax");
}

}  // namespace

Tensor qforward(const QuantizedNetwork& qnet, const Tensor& batch) {
  if (!qnet.ready()) fail(ErrorKind::state, "qforward: network is not calibrated/quantized");
  if (batch.rank() != 4)
    fail(ErrorKind::shape, "qforward: batch must be (B,C,H,W), got " + batch.shape_str());
  const size_t B = batch.dim(0);
  if (B == 0) fail(ErrorKind::shape, "qforward: empty batch");
  std::vector<size_t> want(qnet.input_shape.begin(), qnet.input_shape.end());
  if (std::vector<size_t>{batch.dim(1), batch.dim(2), batch.dim(3)} != want)
    fail(ErrorKind::shape, "qforward: batch " + batch.shape_str() + " does not match network input");
  const size_t per = batch.size() / B;
  Tensor out({B, qnet.class_count});
  for (size_t b = 0; b < B; ++b) {
    Tensor p = qforward_sample(qnet, batch.data.data() + b * per, per);
    std::copy_n(p.data.data(), qnet.class_count, out.data.data() + b * qnet.class_count);
  }
  return out;
}

double top1_agreement(const Network& net, const QuantizedNetwork& qnet,
                      const std::vector<Tensor>& inputs) {
  if (inputs.empty()) fail(ErrorKind::invalid_argument, "top1_agreement: empty input set");
  size_t agree = 0;
  for (const auto& s : inputs) {
    const Tensor pf = forward_sample(net, s);
    Tensor batch({1, s.dim(0), s.dim(1), s.dim(2)});
    batch.data = s.data;
    const Tensor pq = qforward(qnet, batch);
    size_t af = 0, aq = 0;
    for (size_t i = 1; i < pf.size(); ++i)
      if (pf[i] > pf[af]) af = i;
    for (size_t i = 1; i < pq.size(); ++i)
      if (pq[i] > pq[aq]) aq = i;
    if (af == aq) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(inputs.size());
}

Network prune_magnitude(const Network& net, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    fail(ErrorKind::invalid_argument,
         "prune_magnitude: fraction " + std::to_string(fraction) + " outside [0,1]");
  Network out = net;
  size_t total = 0;
  for (const auto& w : out.weights) total += w.size();
  const size_t n_zero = static_cast<size_t>(fraction * static_cast<double>(total));
  if (n_zero == 0) return out;

  // Global flat index over weight tensors in slot order.
  std::vector<size_t> idx(total);
  std::iota(idx.begin(), idx.end(), size_t{0});
  auto value_at = [&](size_t flat) -> float& {
    for (auto& w : out.weights) {
      if (flat < w.size()) return w[flat];
      flat -= w.size();
    }
    fail(ErrorKind::state, "prune_magnitude: index out of range");
  };
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return std::abs(value_at(a)) < std::abs(value_at(b));
  });
  for (size_t i = 0; i < n_zero; ++i) value_at(idx[i]) = 0.0f;
  return out;
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double quantile) {
  const size_t n = sorted.size();
  size_t rank = static_cast<size_t>(std::ceil(quantile * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);
  return sorted[rank - 1];
}

template <typename Forward>
LatencyReport bench_impl(const char* variant, const std::array<size_t, 3>& in_shape,
                         size_t batch_size, size_t frames, uint64_t seed, Forward&& fwd) {
  if (batch_size < 1) fail(ErrorKind::invalid_argument, "bench_latency: batch_size must be >= 1");
  if (frames < 100)
    fail(ErrorKind::invalid_argument,
         "bench_latency: frames must be >= 100, got " + std::to_string(frames));

  Tensor batch({batch_size, in_shape[0], in_shape[1], in_shape[2]});
  Rng rng(seed);
  for (auto& v : batch.data) v = static_cast<float>(rng.unit());

  for (int i = 0; i < 10; ++i) fwd(batch);

  const size_t n_batches = (frames + batch_size - 1) / batch_size;
  std::vector<double> per_frame_ms;
  per_frame_ms.reserve(n_batches);
  double total_ms = 0.0;
  for (size_t b = 0; b < n_batches; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    fwd(batch);
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    total_ms += ms;
    per_frame_ms.push_back(ms / static_cast<double>(batch_size));
  }
  std::sort(per_frame_ms.begin(), per_frame_ms.end());

  LatencyReport r;
  r.variant = variant;
  r.batch_size = batch_size;
  r.mean_ms = total_ms / static_cast<double>(n_batches * batch_size);
  r.p50_ms = nearest_rank(per_frame_ms, 0.50);
  r.p95_ms = nearest_rank(per_frame_ms, 0.95);
  r.fps = 1000.0 / r.mean_ms;
  r.threads = 1;
  return r;
}

}  // namespace

LatencyReport bench_latency(const Network& net, size_t batch_size, size_t frames, uint64_t seed) {
  return bench_impl("float", net.input_shape, batch_size, frames, seed,
                    [&](const Tensor& b) { forward_batch(net, b); });
}

LatencyReport bench_latency(const QuantizedNetwork& qnet, size_t batch_size, size_t frames,
                            uint64_t seed) {
  return bench_impl("quantized", qnet.input_shape, batch_size, frames, seed,
                    [&](const Tensor& b) { qforward(qnet, b); });
}

namespace {

constexpr uint32_t kQWeightsVersion = 1;

}  // namespace

void save_qnetwork(const QuantizedNetwork& qnet, const std::string& path) {
  if (!qnet.ready()) fail(ErrorKind::state, "save_qnetwork: network is not quantized");
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), {'A', 'M', 'Q', 'Q'});
  put_u32le(buf, kQWeightsVersion);
  for (size_t d : qnet.input_shape) put_u32le(buf, static_cast<uint32_t>(d));
  put_u32le(buf, static_cast<uint32_t>(qnet.class_count));
  put_u32le(buf, static_cast<uint32_t>(qnet.layers.size()));
  for (const auto& l : qnet.layers) {
    put_u8(buf, static_cast<uint8_t>(l.kind));
    put_u32le(buf, static_cast<uint32_t>(l.filters));
    put_u32le(buf, static_cast<uint32_t>(l.units));
  }
  auto put_qp = [&buf](const QuantParams& qp) {
    put_f64le(buf, qp.scale);
    put_u32le(buf, static_cast<uint32_t>(qp.zero_point));
  };
  put_qp(qnet.input_qp);
  for (const auto& qp : qnet.act_qp) put_qp(qp);
  put_u32le(buf, static_cast<uint32_t>(qnet.qlayers.size()));
  for (const auto& q : qnet.qlayers) {
    put_u32le(buf, static_cast<uint32_t>(q.out_channels));
    put_u32le(buf, static_cast<uint32_t>(q.k));
    for (int8_t w : q.w8) put_u8(buf, static_cast<uint8_t>(w));
    for (double s : q.w_scales) put_f64le(buf, s);
    for (int32_t b : q.bias_q) put_u32le(buf, static_cast<uint32_t>(b));
    for (double m : q.requant) put_f64le(buf, m);
    put_u32le(buf, static_cast<uint32_t>(q.in_zp));
    put_u32le(buf, static_cast<uint32_t>(q.out_zp));
    put_u8(buf, q.dequant_output ? 1 : 0);
  }
  put_u32le(buf, static_cast<uint32_t>(qnet.luts.size()));
  for (const auto& lut : qnet.luts) buf.insert(buf.end(), lut.begin(), lut.end());
  for (int idx : qnet.lut_index) put_u32le(buf, static_cast<uint32_t>(idx));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) fail(ErrorKind::io, "short write to " + path);
}

QuantizedNetwork load_qnetwork(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r{std::span<const uint8_t>(buf)};

  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "AMQQ"))
    fail(ErrorKind::format, path + ": not a quantized weights file (bad magic)");
  const uint32_t version = r.u32le();
  if (version != kQWeightsVersion)
    fail(ErrorKind::format, path + ": unsupported version " + std::to_string(version));

  QuantizedNetwork qn;
  for (auto& d : qn.input_shape) d = r.u32le();
  qn.class_count = r.u32le();
  const uint32_t n_layers = r.u32le();
  for (uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const uint8_t kind = r.u8();
    if (kind < 1 || kind > 6)
      fail(ErrorKind::format, path + ": unknown layer kind tag " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.filters = r.u32le();
    l.units = r.u32le();
    qn.layers.push_back(l);
  }
  auto read_qp = [&r]() {
    QuantParams qp;
    qp.scale = r.f64le();
    qp.zero_point = static_cast<int32_t>(r.u32le());
    return qp;
  };
  qn.input_qp = read_qp();
  for (uint32_t i = 0; i < n_layers; ++i) qn.act_qp.push_back(read_qp());
  size_t want_qlayers = 0;
  for (const auto& l : qn.layers)
    if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) ++want_qlayers;
  const uint32_t n_qlayers = r.u32le();
  if (n_qlayers != want_qlayers)
    fail(ErrorKind::format, path + ": " + std::to_string(n_qlayers) +
                                " quantized layers for a topology with " +
                                std::to_string(want_qlayers));
  for (uint32_t i = 0; i < n_qlayers; ++i) {
    QLayer q;
    q.out_channels = r.u32le();
    q.k = r.u32le();
    const auto w = r.take(q.out_channels * q.k);
    q.w8.assign(reinterpret_cast<const int8_t*>(w.data()),
                reinterpret_cast<const int8_t*>(w.data()) + w.size());
    q.w16.assign(q.w8.begin(), q.w8.end());
    for (size_t c = 0; c < q.out_channels; ++c) q.w_scales.push_back(r.f64le());
    for (size_t c = 0; c < q.out_channels; ++c) q.bias_q.push_back(static_cast<int32_t>(r.u32le()));
    for (size_t c = 0; c < q.out_channels; ++c) q.requant.push_back(r.f64le());
    q.in_zp = static_cast<int32_t>(r.u32le());
    q.out_zp = static_cast<int32_t>(r.u32le());
    q.dequant_output = r.u8() != 0;
    qn.qlayers.push_back(std::move(q));
  }
  const uint32_t n_luts = r.u32le();
  for (uint32_t i = 0; i < n_luts; ++i) {
    std::array<uint8_t, 256> lut;
    const auto bytes = r.take(256);
    std::copy(bytes.begin(), bytes.end(), lut.begin());
    qn.luts.push_back(lut);
  }
  for (uint32_t i = 0; i < n_layers; ++i) {
    const int idx = static_cast<int32_t>(r.u32le());
    if (idx < -1 || idx >= static_cast<int>(n_luts))
      fail(ErrorKind::format, path + ": lut index " + std::to_string(idx) + " out of range");
    qn.lut_index.push_back(idx);
  }
  if (!r.done())
    fail(ErrorKind::format,
         path + ": " + std::to_string(r.remaining()) + " trailing bytes after the last table");
  return qn;
}

double reduction_pct(double base_ms, double new_ms) {
  if (base_ms <= 0.0) fail(ErrorKind::invalid_argument, "reduction_pct: baseline must be > 0");
  return (base_ms - new_ms) / base_ms * 100.0;
}

std::string latency_report_json(const LatencyReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["batch_size"] = r.batch_size;
  j["mean_ms"] = r.mean_ms;
  j["p50_ms"] = r.p50_ms;
  j["p95_ms"] = r.p95_ms;
  j["fps"] = r.fps;
  j["threads"] = r.threads;
  return j.dump();
}

}  // namespace amqc
