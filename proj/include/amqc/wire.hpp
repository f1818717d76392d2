#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amqc/bytes.hpp"

namespace amqc {

// MQTT remaining-length varint: 7 bits per byte, continuation bit 0x80,
// little end first, at most 4 bytes (max 268,435,455).
inline constexpr uint32_t kVarintMax = 268'435'455;

void encode_varint(std::vector<uint8_t>& out, uint32_t value);
// Reads from the cursor; rejects a 4th byte with its continuation bit set and
// values above the range.
uint32_t decode_varint(ByteReader& r);

// Compact defect telemetry record, fixed 26-byte little-endian layout:
// version, timestamp_us, layer_index, class_id, confidence_q, bbox, node_id
// (1+8+4+1+2+8+2 bytes).
struct DefectRecord {
  uint8_t version = 1;
  uint64_t timestamp_us = 0;
  uint32_t layer_index = 0;
  uint8_t class_id = 0;
  uint16_t confidence_q = 0;  // confidence * 65535, rounded
  uint16_t xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  uint16_t node_id = 0;

  bool operator==(const DefectRecord&) const = default;

  double confidence() const { return confidence_q / 65535.0; }
};

inline constexpr size_t kRecordBytes = 26;

void validate_record(const DefectRecord& r);
std::vector<uint8_t> encode_record(const DefectRecord& r);
DefectRecord decode_record(std::span<const uint8_t> bytes);

// Canonical JSON baseline for the compactness comparison: fixed key order
// (version, timestamp_us, layer_index, class_id, confidence, bbox, node_id),
// no whitespace, confidence as 6-decimal fixed point.
std::string record_json(const DefectRecord& r);
// Accepts exactly the canonical form's fields; confidence is re-quantized.
DefectRecord record_from_json(const std::string& text);

}  // namespace amqc
