#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "amqc/error.hpp"

namespace amqc {

// Little-endian byte packing used by the weights file and the record codec.
// MQTT integers are big-endian; those helpers live here too.

inline void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

inline void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32le(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

inline void put_f64le(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64le(out, bits);
}

inline void put_u16be(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v & 0xFF));
}

// Cursor-based reader that throws a format error on underrun.
class ByteReader {
public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  uint16_t u16le() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  uint32_t u32le() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<size_t>(i)];
    pos_ += 4;
    return v;
  }

  uint64_t u64le() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<size_t>(i)];
    pos_ += 8;
    return v;
  }

  float f32le() {
    uint32_t bits = u32le();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64le() {
    uint64_t bits = u64le();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  uint16_t u16be() {
    need(2);
    uint16_t v = static_cast<uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::span<const uint8_t> take(size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

private:
  void need(size_t n) {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::format,
           "truncated payload at byte offset " + std::to_string(pos_) + " (need " +
               std::to_string(n) + " bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace amqc
