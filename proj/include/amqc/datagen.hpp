#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "amqc/annotation.hpp"
#include "amqc/image.hpp"
#include "amqc/tensor.hpp"

namespace amqc {

// Shape rules for the procedural defect generator. Crack: thin dark polyline.
// Pinhole: dark disk, radius <= 3 px. Hole: dark disk, radius 4-10 px.
// Spatter: cluster of bright blobs. Background is uniform texture noise around
// background_mean.
struct GenParams {
  int height = 80;
  int width = 120;
  int background_mean = 150;
  int background_noise = 12;  // uniform +/- amplitude
  int dark_level = 25;        // defect intensity for dark classes
  int bright_level = 235;     // blob intensity for spatter

  bool operator==(const GenParams&) const = default;
};

// Deterministic for (class_id, seed, params), byte-identical across platforms
// (integer arithmetic only).
std::pair<GrayImage, Annotation> synth_image(int class_id, uint64_t seed,
                                             const GenParams& params = {});

// Pipeline stages, exposed for testing. preprocess() composes them in the
// fixed order blur -> stretch -> resize -> scale.
GrayImage box_blur3(const GrayImage& img);
GrayImage contrast_stretch(const GrayImage& img);  // min==max is the identity
GrayImage resize_bilinear(const GrayImage& img, int target_h, int target_w);

// Returns shape (1, target_h, target_w) with values in [0,1].
Tensor preprocess(const GrayImage& img, int target_h, int target_w);

struct AugmentSpec {
  enum class Kind { flip_h, flip_v, rot90, rot180, rot270, brightness, gauss_noise };
  Kind kind = Kind::flip_h;
  int delta = 0;       // brightness, in [-64, 64]
  double sigma = 0.0;  // gauss_noise, in (0, 32]

  static AugmentSpec flip_h() { return {Kind::flip_h, 0, 0.0}; }
  static AugmentSpec flip_v() { return {Kind::flip_v, 0, 0.0}; }
  static AugmentSpec rot90() { return {Kind::rot90, 0, 0.0}; }
  static AugmentSpec rot180() { return {Kind::rot180, 0, 0.0}; }
  static AugmentSpec rot270() { return {Kind::rot270, 0, 0.0}; }
  static AugmentSpec brightness(int delta) { return {Kind::brightness, delta, 0.0}; }
  static AugmentSpec gauss_noise(double sigma) { return {Kind::gauss_noise, 0, sigma}; }
};

// One augmentation per call; rotations are clockwise multiples of 90 degrees.
GrayImage augment(const GrayImage& img, const AugmentSpec& spec, uint64_t seed);

// Maps a bounding box through the pixel permutation of `spec` (identity for
// brightness and noise).
Annotation transform_annotation(const Annotation& a, const AugmentSpec& spec);

struct SampleSet {
  std::vector<std::pair<GrayImage, Annotation>> samples;
  uint64_t seed = 0;
  std::array<size_t, kNumClasses> class_counts{};
};

// Balanced synthetic dataset: n_samples split across the four classes
// (remainder goes to the lowest class ids), reproducible from seed.
SampleSet make_dataset(size_t n_samples, uint64_t seed, const GenParams& params = {});

// Stratified train/test split at ratio train:test per class, rounded by the
// largest-remainder rule; selection order is a seeded per-class shuffle.
std::pair<SampleSet, SampleSet> split_dataset(const SampleSet& set, int ratio_train,
                                              int ratio_test, uint64_t seed);

}  // namespace amqc
