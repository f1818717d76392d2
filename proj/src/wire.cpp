#include "amqc/wire.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace amqc {

void encode_varint(std::vector<uint8_t>& out, uint32_t value) {
  if (value > kVarintMax)
    fail(ErrorKind::invalid_argument,
         "varint value " + std::to_string(value) + " exceeds " + std::to_string(kVarintMax));
  do {
    uint8_t byte = value & 0x7F;
    value >>= 7;
    if (value > 0) byte |= 0x80;
    out.push_back(byte);
  } while (value > 0);
}

uint32_t decode_varint(ByteReader& r) {
  uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    const uint8_t byte = r.u8();
    value |= static_cast<uint32_t>(byte & 0x7F) << (7 * i);
    if ((byte & 0x80) == 0) return value;
  }
  fail(ErrorKind::protocol, "malformed varint: continuation bit set on 4th byte");
}

void validate_record(const DefectRecord& r) {
  if (r.version != 1)
    fail(ErrorKind::format, "record field version: expected 1, got " + std::to_string(r.version));
  if (r.class_id > 3)
    fail(ErrorKind::format, "record field class_id: " + std::to_string(r.class_id) + " > 3");
  if (r.xmin >= r.xmax || r.ymin >= r.ymax)
    fail(ErrorKind::format, "record field bbox: inverted or empty box [" + std::to_string(r.xmin) +
                                "," + std::to_string(r.ymin) + "," + std::to_string(r.xmax) + "," +
                                std::to_string(r.ymax) + "]");
}

std::vector<uint8_t> encode_record(const DefectRecord& r) {
  validate_record(r);
  std::vector<uint8_t> out;
  out.reserve(kRecordBytes);
  put_u8(out, r.version);
  put_u64le(out, r.timestamp_us);
  put_u32le(out, r.layer_index);
  put_u8(out, r.class_id);
  put_u16le(out, r.confidence_q);
  put_u16le(out, r.xmin);
  put_u16le(out, r.ymin);
  put_u16le(out, r.xmax);
  put_u16le(out, r.ymax);
  put_u16le(out, r.node_id);
  return out;
}

DefectRecord decode_record(std::span<const uint8_t> bytes) {
  if (bytes.size() != kRecordBytes)
    fail(ErrorKind::format, "record must be exactly " + std::to_string(kRecordBytes) +
                                " bytes, got " + std::to_string(bytes.size()));
  ByteReader r{bytes};
  DefectRecord rec;
  rec.version = r.u8();
  rec.timestamp_us = r.u64le();
  rec.layer_index = r.u32le();
  rec.class_id = r.u8();
  rec.confidence_q = r.u16le();
  rec.xmin = r.u16le();
  rec.ymin = r.u16le();
  rec.xmax = r.u16le();
  rec.ymax = r.u16le();
  rec.node_id = r.u16le();
  validate_record(rec);
  return rec;
}

std::string record_json(const DefectRecord& r) {
  validate_record(r);
  char conf[16];
  std::snprintf(conf, sizeof conf, "%.6f", r.confidence());
  std::string s;
  s += "{\"version\":" + std::to_string(r.version);
  s += ",\"timestamp_us\":" + std::to_string(r.timestamp_us);
  s += ",\"layer_index\":" + std::to_string(r.layer_index);
  s += ",\"class_id\":" + std::to_string(r.class_id);
  s += ",\"confidence\":";
  s += conf;
  s += ",\"bbox\":[" + std::to_string(r.xmin) + "," + std::to_string(r.ymin) + "," +
       std::to_string(r.xmax) + "," + std::to_string(r.ymax) + "]";
  s += ",\"node_id\":" + std::to_string(r.node_id);
  s += "}";
  return s;
}

DefectRecord record_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("record JSON: ") + e.what());
  }
  try {
    DefectRecord r;
    r.version = j.at("version").get<uint8_t>();
    r.timestamp_us = j.at("timestamp_us").get<uint64_t>();
    r.layer_index = j.at("layer_index").get<uint32_t>();
    r.class_id = j.at("class_id").get<uint8_t>();
    const double conf = j.at("confidence").get<double>();
    if (conf < 0.0 || conf > 1.0)
      fail(ErrorKind::format, "record JSON: confidence outside [0,1]");
    r.confidence_q = static_cast<uint16_t>(std::llround(conf * 65535.0));
    const auto& bbox = j.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4)
      fail(ErrorKind::format, "record JSON: bbox must be a 4-element array");
    r.xmin = bbox[0].get<uint16_t>();
    r.ymin = bbox[1].get<uint16_t>();
    r.xmax = bbox[2].get<uint16_t>();
    r.ymax = bbox[3].get<uint16_t>();
    r.node_id = j.at("node_id").get<uint16_t>();
    validate_record(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("record JSON: ") + e.what());
  }
}

}  // namespace amqc
