#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace amqc {

// 8-bit grayscale image, row-major, top-left origin.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // length height*width

  GrayImage() = default;
  GrayImage(int h, int w, uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

  uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

// Binary PGM ("P5", maxval 255). Header is exactly "P5\n<width> <height>\n255\n"
// followed by height*width raw bytes.
std::vector<uint8_t> encode_pgm(const GrayImage& img);
GrayImage decode_pgm(std::span<const uint8_t> bytes);

void write_pgm(const GrayImage& img, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace amqc
