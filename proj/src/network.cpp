#include "amqc/network.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "amqc/bytes.hpp"

namespace amqc {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

Network full_preset() { return make_cnn<float>({32, 64, 512, 512, 256}, 4, {1, 80, 120}); }

Network tiny_preset() { return make_cnn<float>({8, 16, 16, 16, 16}, 4, {1, 80, 120}); }

Network make_preset(const std::string& name) {
  if (name == "full") return full_preset();
  if (name == "tiny") return tiny_preset();
  fail(ErrorKind::invalid_argument, "unknown preset '" + name + "' (expected tiny or full)");
}

namespace {

constexpr uint32_t kWeightsVersion = 1;

void put_tensor(std::vector<uint8_t>& out, const Tensor& t) {
  put_u32le(out, static_cast<uint32_t>(t.rank()));
  for (size_t d : t.shape) put_u32le(out, static_cast<uint32_t>(d));
  for (float v : t.data) put_f32le(out, v);
}

Tensor read_tensor(ByteReader& r, const char* what) {
  const uint32_t ndim = r.u32le();
  if (ndim == 0 || ndim > 8)
    fail(ErrorKind::format, std::string("weights file: bad dimension count for ") + what);
  std::vector<size_t> shape(ndim);
  size_t count = 1;
  for (auto& d : shape) {
    d = r.u32le();
    if (d == 0) fail(ErrorKind::format, std::string("weights file: zero dimension in ") + what);
    count *= d;
  }
  Tensor t(shape);
  for (size_t i = 0; i < count; ++i) t[i] = r.f32le();
  return t;
}

}  // namespace

void save_weights(const Network& net, const std::string& path) {
  if (net.weights.size() != net.param_layer_count())
    fail(ErrorKind::state, "save_weights: network parameters not initialized");
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), {'A', 'M', 'Q', 'C'});
  put_u32le(buf, kWeightsVersion);
  put_u32le(buf, static_cast<uint32_t>(net.param_layer_count()));
  size_t slot = 0;
  for (const auto& l : net.layers) {
    if (l.kind != LayerKind::conv && l.kind != LayerKind::dense) continue;
    put_u8(buf, static_cast<uint8_t>(l.kind));
    put_tensor(buf, net.weights[slot]);
    put_tensor(buf, net.biases[slot]);
    ++slot;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) fail(ErrorKind::io, "short write to " + path);
}

void load_weights(Network& net, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r{std::span<const uint8_t>(buf)};

  const auto magic = r.take(4);
  if (magic[0] != 'A' || magic[1] != 'M' || magic[2] != 'Q' || magic[3] != 'C')
    fail(ErrorKind::format, "weights file: bad magic");
  const uint32_t version = r.u32le();
  if (version != kWeightsVersion)
    fail(ErrorKind::format, "weights file: unsupported version " + std::to_string(version));
  const uint32_t count = r.u32le();
  if (count != net.param_layer_count())
    fail(ErrorKind::format, "weights file: has " + std::to_string(count) +
                                " parameterized layers, network expects " +
                                std::to_string(net.param_layer_count()));

  const auto shapes = infer_shapes(net);
  std::vector<size_t> cur(net.input_shape.begin(), net.input_shape.end());
  std::vector<Tensor> weights, biases;
  size_t li = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) {
      const uint8_t tag = r.u8();
      if (tag != static_cast<uint8_t>(l.kind))
        fail(ErrorKind::format, "weights file: layer " + std::to_string(li) + " kind tag " +
                                    std::to_string(tag) + " does not match network (" +
                                    layer_kind_name(l.kind) + ")");
      Tensor w = read_tensor(r, "weights");
      Tensor b = read_tensor(r, "bias");
      std::vector<size_t> want_w, want_b;
      if (l.kind == LayerKind::conv) {
        want_w = {l.filters, cur[0], 3, 3};
        want_b = {l.filters};
      } else {
        want_w = {l.units, cur[0]};
        want_b = {l.units};
      }
      if (w.shape != want_w || b.shape != want_b)
        fail(ErrorKind::format, "weights file: layer " + std::to_string(li) +
                                    " tensor shapes do not match the network architecture");
      weights.push_back(std::move(w));
      biases.push_back(std::move(b));
      ++li;
    }
    cur = shapes[i];
  }
  if (r.remaining() != 0)
    fail(ErrorKind::format,
         "weights file: " + std::to_string(r.remaining()) + " trailing bytes after parameters");
  net.weights = std::move(weights);
  net.biases = std::move(biases);
}

}  // namespace amqc
