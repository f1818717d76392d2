#include "amqc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "amqc/error.hpp"
#include "amqc/rng.hpp"

namespace amqc {

namespace {

void check_image(const GrayImage& img) {
  if (img.height <= 0 || img.width <= 0) fail(ErrorKind::invalid_argument, "image has zero area");
  if (img.pixels.size() != static_cast<size_t>(img.height) * static_cast<size_t>(img.width))
    fail(ErrorKind::invalid_argument, "image pixel count does not match dimensions");
}

uint8_t sat_u8(long v) { return static_cast<uint8_t>(std::clamp(v, 0L, 255L)); }

// Paints defect pixels and tracks the tight bounding box.
class Painter {
public:
  explicit Painter(GrayImage& img) : img_(img) {}

  void set(int y, int x, uint8_t v) {
    if (y < 0 || y >= img_.height || x < 0 || x >= img_.width) return;
    img_.at(y, x) = v;
    min_x_ = std::min(min_x_, x);
    max_x_ = std::max(max_x_, x);
    min_y_ = std::min(min_y_, y);
    max_y_ = std::max(max_y_, y);
  }

  void line(int y0, int x0, int y1, int x1, int level, Rng& rng) {
    // Bresenham; 8-connected, so chained segments stay connected.
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int x = x0, y = y0;
    while (true) {
      set(y, x, sat_u8(level + rng.range(-8, 8)));
      if (x == x1 && y == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
    }
  }

  void disk(int cy, int cx, int r, int level, Rng& rng) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (dx * dx + dy * dy <= r * r)
          set(cy + dy, cx + dx, sat_u8(level + rng.range(-8, 8)));
  }

  Annotation bbox(int class_id) const {
    Annotation a;
    a.class_id = class_id;
    a.xmin = min_x_;
    a.ymin = min_y_;
    a.xmax = max_x_ + 1;
    a.ymax = max_y_ + 1;
    a.image_width = img_.width;
    a.image_height = img_.height;
    return a;
  }

private:
  GrayImage& img_;
  int min_x_ = 1 << 30, max_x_ = -1, min_y_ = 1 << 30, max_y_ = -1;
};

}  // namespace

std::pair<GrayImage, Annotation> synth_image(int class_id, uint64_t seed, const GenParams& p) {
  if (class_id < 0 || class_id >= kNumClasses)
    fail(ErrorKind::invalid_argument, "synth_image: unknown class id " + std::to_string(class_id));
  if (p.height < 32 || p.width < 32)
    fail(ErrorKind::invalid_argument, "synth_image: image must be at least 32x32");

  Rng rng(derive_seed(seed, static_cast<uint64_t>(class_id)));

  GrayImage img(p.height, p.width);
  for (auto& px : img.pixels)
    px = sat_u8(p.background_mean + rng.range(-p.background_noise, p.background_noise));

  Painter painter(img);
  const int margin = 14;
  const int cy_lo = margin, cy_hi = p.height - 1 - margin;
  const int cx_lo = margin, cx_hi = p.width - 1 - margin;

  switch (static_cast<DefectClass>(class_id)) {
    case DefectClass::crack: {
      int y = static_cast<int>(rng.range(cy_lo, cy_hi));
      int x = static_cast<int>(rng.range(cx_lo, cx_hi));
      const int segments = static_cast<int>(rng.range(4, 8));
      // Overall drift keeps the polyline from folding onto itself.
      const int drift_x = rng.range(0, 1) ? 1 : -1;
      for (int s = 0; s < segments; ++s) {
        int ny = std::clamp(y + static_cast<int>(rng.range(-9, 9)), 2, p.height - 3);
        int nx = std::clamp(x + drift_x * static_cast<int>(rng.range(5, 13)), 2, p.width - 3);
        painter.line(y, x, ny, nx, p.dark_level, rng);
        y = ny;
        x = nx;
      }
      break;
    }
    case DefectClass::pinhole: {
      const int r = static_cast<int>(rng.range(1, 3));
      const int cy = static_cast<int>(rng.range(cy_lo, cy_hi));
      const int cx = static_cast<int>(rng.range(cx_lo, cx_hi));
      painter.disk(cy, cx, r, p.dark_level, rng);
      break;
    }
    case DefectClass::hole: {
      const int r = static_cast<int>(rng.range(4, 10));
      const int cy = static_cast<int>(rng.range(cy_lo, cy_hi));
      const int cx = static_cast<int>(rng.range(cx_lo, cx_hi));
      painter.disk(cy, cx, r, p.dark_level, rng);
      break;
    }
    case DefectClass::spatter: {
      const int cy = static_cast<int>(rng.range(cy_lo, cy_hi));
      const int cx = static_cast<int>(rng.range(cx_lo, cx_hi));
      const int blobs = static_cast<int>(rng.range(6, 14));
      for (int b = 0; b < blobs; ++b) {
        const int by = std::clamp(cy + static_cast<int>(rng.range(-11, 11)), 3, p.height - 4);
        const int bx = std::clamp(cx + static_cast<int>(rng.range(-11, 11)), 3, p.width - 4);
        painter.disk(by, bx, static_cast<int>(rng.range(1, 2)), p.bright_level, rng);
      }
      break;
    }
  }

  Annotation a = painter.bbox(class_id);
  validate_annotation(a);
  return {std::move(img), a};
}

GrayImage box_blur3(const GrayImage& img) {
  check_image(img);
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      long sum = 0;
      long count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= img.height || nx < 0 || nx >= img.width) continue;
          sum += img.at(ny, nx);
          ++count;
        }
      }
      out.at(y, x) = static_cast<uint8_t>((sum + count / 2) / count);
    }
  }
  return out;
}

GrayImage contrast_stretch(const GrayImage& img) {
  check_image(img);
  const auto [lo_it, hi_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const long lo = *lo_it, hi = *hi_it;
  if (lo == hi) return img;  // degenerate range: identity
  GrayImage out(img.height, img.width);
  const long range = hi - lo;
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<uint8_t>(((img.pixels[i] - lo) * 510 + range) / (2 * range));
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, int target_h, int target_w) {
  check_image(img);
  if (target_h <= 0 || target_w <= 0)
    fail(ErrorKind::invalid_argument, "resize target must be positive");
  GrayImage out(target_h, target_w);
  const double sy_scale = static_cast<double>(img.height) / target_h;
  const double sx_scale = static_cast<double>(img.width) / target_w;
  for (int y = 0; y < target_h; ++y) {
    double sy = (y + 0.5) * sy_scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_w; ++x) {
      double sx = (x + 0.5) * sx_scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - x0;
      const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
      const double bot = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
      out.at(y, x) = sat_u8(std::llround(top * (1.0 - fy) + bot * fy));
    }
  }
  return out;
}

Tensor preprocess(const GrayImage& img, int target_h, int target_w) {
  check_image(img);
  if (target_h < 8 || target_w < 8)
    fail(ErrorKind::invalid_argument, "preprocess: target dims must be at least 8x8");
  const GrayImage resized =
      resize_bilinear(contrast_stretch(box_blur3(img)), target_h, target_w);
  Tensor t({1, static_cast<size_t>(target_h), static_cast<size_t>(target_w)});
  for (size_t i = 0; i < resized.pixels.size(); ++i)
    t.data[i] = static_cast<float>(resized.pixels[i]) / 255.0f;
  return t;
}

GrayImage augment(const GrayImage& img, const AugmentSpec& spec, uint64_t seed) {
  check_image(img);
  const int h = img.height, w = img.width;
  using K = AugmentSpec::Kind;
  switch (spec.kind) {
    case K::flip_h: {
      GrayImage out(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, w - 1 - x) = img.at(y, x);
      return out;
    }
    case K::flip_v: {
      GrayImage out(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(h - 1 - y, x) = img.at(y, x);
      return out;
    }
    case K::rot90: {  // clockwise
      GrayImage out(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, h - 1 - y) = img.at(y, x);
      return out;
    }
    case K::rot180: {
      GrayImage out(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(h - 1 - y, w - 1 - x) = img.at(y, x);
      return out;
    }
    case K::rot270: {
      GrayImage out(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(w - 1 - x, y) = img.at(y, x);
      return out;
    }
    case K::brightness: {
      if (spec.delta < -64 || spec.delta > 64)
        fail(ErrorKind::invalid_argument, "augment: brightness delta outside [-64,64]");
      GrayImage out(h, w);
      for (size_t i = 0; i < img.pixels.size(); ++i)
        out.pixels[i] = sat_u8(static_cast<long>(img.pixels[i]) + spec.delta);
      return out;
    }
    case K::gauss_noise: {
      if (!(spec.sigma > 0.0) || spec.sigma > 32.0)
        fail(ErrorKind::invalid_argument, "augment: noise sigma outside (0,32]");
      Rng rng(seed);
      GrayImage out(h, w);
      for (size_t i = 0; i < img.pixels.size(); ++i)
        out.pixels[i] =
            sat_u8(static_cast<long>(img.pixels[i]) + std::llround(rng.gaussian() * spec.sigma));
      return out;
    }
  }
  fail(ErrorKind::invalid_argument, "augment: unknown spec");
}

Annotation transform_annotation(const Annotation& a, const AugmentSpec& spec) {
  validate_annotation(a);
  Annotation out = a;
  const int w = a.image_width, h = a.image_height;
  using K = AugmentSpec::Kind;
  switch (spec.kind) {
    case K::flip_h:
      out.xmin = w - a.xmax;
      out.xmax = w - a.xmin;
      break;
    case K::flip_v:
      out.ymin = h - a.ymax;
      out.ymax = h - a.ymin;
      break;
    case K::rot90:
      out.xmin = h - a.ymax;
      out.xmax = h - a.ymin;
      out.ymin = a.xmin;
      out.ymax = a.xmax;
      out.image_width = h;
      out.image_height = w;
      break;
    case K::rot180:
      out.xmin = w - a.xmax;
      out.xmax = w - a.xmin;
      out.ymin = h - a.ymax;
      out.ymax = h - a.ymin;
      break;
    case K::rot270:
      out.xmin = a.ymin;
      out.xmax = a.ymax;
      out.ymin = w - a.xmax;
      out.ymax = w - a.xmin;
      out.image_width = h;
      out.image_height = w;
      break;
    case K::brightness:
    case K::gauss_noise:
      break;
  }
  validate_annotation(out);
  return out;
}

SampleSet make_dataset(size_t n_samples, uint64_t seed, const GenParams& params) {
  SampleSet set;
  set.seed = seed;
  set.samples.reserve(n_samples);
  for (int c = 0; c < kNumClasses; ++c) {
    const size_t count = n_samples / kNumClasses +
                         (static_cast<size_t>(c) < n_samples % kNumClasses ? 1 : 0);
    for (size_t i = 0; i < count; ++i) {
      const uint64_t sample_seed =
          derive_seed(seed, (static_cast<uint64_t>(c) << 32) | static_cast<uint64_t>(i));
      set.samples.push_back(synth_image(c, sample_seed, params));
      ++set.class_counts[static_cast<size_t>(c)];
    }
  }
  return set;
}

std::pair<SampleSet, SampleSet> split_dataset(const SampleSet& set, int ratio_train,
                                              int ratio_test, uint64_t seed) {
  if (ratio_train < 0 || ratio_test < 0 || ratio_train + ratio_test <= 0)
    fail(ErrorKind::invalid_argument, "split_dataset: ratio parts must be nonnegative with a positive sum");

  std::array<std::vector<size_t>, kNumClasses> by_class;
  for (size_t i = 0; i < set.samples.size(); ++i)
    by_class[static_cast<size_t>(set.samples[i].second.class_id)].push_back(i);

  Rng rng(seed);
  SampleSet train, test;
  train.seed = seed;
  test.seed = seed;

  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    const size_t n = idx.size();
    if (n == 0) {
      if (ratio_test > 0)
        fail(ErrorKind::invalid_argument,
             "split_dataset: class " + std::string(class_name(c)) +
                 " is empty but a test share was requested");
      continue;
    }
    rng.shuffle(idx);

    // Largest-remainder apportionment of n samples over train:test.
    const long total = ratio_train + ratio_test;
    const long t_floor = static_cast<long>(n) * ratio_train / total;
    const long rem_train = static_cast<long>(n) * ratio_train % total;
    const long e_floor = static_cast<long>(n) * ratio_test / total;
    const long rem_test = static_cast<long>(n) * ratio_test % total;
    long n_train = t_floor;
    if (t_floor + e_floor < static_cast<long>(n)) {
      // One leftover seat; ties go to train.
      n_train += (rem_train >= rem_test) ? 1 : 0;
    }

    for (size_t k = 0; k < n; ++k) {
      SampleSet& dst = (k < static_cast<size_t>(n_train)) ? train : test;
      dst.samples.push_back(set.samples[idx[k]]);
      ++dst.class_counts[static_cast<size_t>(c)];
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace amqc
