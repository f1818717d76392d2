#include "amqc/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "amqc/error.hpp"

namespace amqc {

namespace {

void check_valid(const GrayImage& img) {
  if (img.height <= 0 || img.width <= 0)
    fail(ErrorKind::invalid_argument, "image has zero area");
  if (img.pixels.size() != static_cast<size_t>(img.height) * static_cast<size_t>(img.width))
    fail(ErrorKind::invalid_argument, "image pixel count does not match dimensions");
}

// Reads one whitespace-delimited unsigned decimal token.
long parse_uint_token(std::span<const uint8_t> bytes, size_t& pos, const char* what) {
  while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
    fail(ErrorKind::format, std::string("PGM: missing ") + what);
  long v = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    v = v * 10 + (bytes[pos] - '0');
    if (v > 1 << 30) fail(ErrorKind::format, std::string("PGM: ") + what + " out of range");
    ++pos;
  }
  return v;
}

}  // namespace

std::vector<uint8_t> encode_pgm(const GrayImage& img) {
  check_valid(img);
  std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

GrayImage decode_pgm(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorKind::format, "PGM: not a P5 file");
  size_t pos = 2;
  const long width = parse_uint_token(bytes, pos, "width");
  const long height = parse_uint_token(bytes, pos, "height");
  const long maxval = parse_uint_token(bytes, pos, "maxval");
  if (width <= 0 || height <= 0) fail(ErrorKind::format, "PGM: non-positive dimensions");
  if (maxval != 255) fail(ErrorKind::format, "PGM: maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    fail(ErrorKind::format, "PGM: missing whitespace after maxval");
  ++pos;  // exactly one whitespace byte separates header and payload
  const size_t need = static_cast<size_t>(width) * static_cast<size_t>(height);
  if (bytes.size() - pos < need)
    fail(ErrorKind::format, "PGM: truncated pixel payload (need " + std::to_string(need) +
                                " bytes, have " + std::to_string(bytes.size() - pos) + ")");
  if (bytes.size() - pos > need)
    fail(ErrorKind::format, "PGM: trailing bytes after pixel payload");
  GrayImage img(static_cast<int>(height), static_cast<int>(width));
  std::copy(bytes.begin() + static_cast<long>(pos), bytes.end(), img.pixels.begin());
  return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

}  // namespace amqc
