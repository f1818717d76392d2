#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "amqc/gemm.hpp"
#include "amqc/tensor.hpp"

namespace amqc {

// Spec-level layer operations on single samples, templated over the precision
// mode. The float instantiation backs the production network; the double one
// backs gradient verification.

namespace detail {

template <typename T>
void gemm_rowdot(const T* A, const T* B, T* C, size_t M, size_t N, size_t K) {
  if constexpr (std::is_same_v<T, float>) {
    gemm_rowdot_f32(A, B, C, M, N, K);
  } else {
    for (size_t m = 0; m < M; ++m)
      for (size_t n = 0; n < N; ++n) {
        T s = T(0);
        for (size_t k = 0; k < K; ++k) s += A[m * K + k] * B[n * K + k];
        C[m * N + n] = s;
      }
  }
}

}  // namespace detail

// Patch matrix for stride-1 zero-padded convolution: one row per output pixel
// (oy,ox), columns indexed by (c,dy,dx) to match the (F,C,kh,kw) filter
// layout. `rows` must hold H*W*C*kh*kw elements.
template <typename T>
void im2row(const T* input, size_t C, size_t H, size_t W, size_t kh, size_t kw, T* rows) {
  const int pad_y = static_cast<int>(kh) / 2;
  const int pad_x = static_cast<int>(kw) / 2;
  const size_t K = C * kh * kw;
  for (size_t oy = 0; oy < H; ++oy) {
    for (size_t ox = 0; ox < W; ++ox) {
      T* row = rows + (oy * W + ox) * K;
      size_t k = 0;
      for (size_t c = 0; c < C; ++c) {
        const T* plane = input + c * H * W;
        for (size_t dy = 0; dy < kh; ++dy) {
          const int iy = static_cast<int>(oy + dy) - pad_y;
          if (iy < 0 || iy >= static_cast<int>(H)) {
            for (size_t dx = 0; dx < kw; ++dx) row[k++] = T(0);
            continue;
          }
          for (size_t dx = 0; dx < kw; ++dx) {
            const int ix = static_cast<int>(ox + dx) - pad_x;
            row[k++] = (ix < 0 || ix >= static_cast<int>(W)) ? T(0) : plane[iy * W + ix];
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2row, used by the convolution backward pass.
template <typename T>
void row2im_add(const T* rows, size_t C, size_t H, size_t W, size_t kh, size_t kw, T* input) {
  const int pad_y = static_cast<int>(kh) / 2;
  const int pad_x = static_cast<int>(kw) / 2;
  const size_t K = C * kh * kw;
  for (size_t oy = 0; oy < H; ++oy) {
    for (size_t ox = 0; ox < W; ++ox) {
      const T* row = rows + (oy * W + ox) * K;
      size_t k = 0;
      for (size_t c = 0; c < C; ++c) {
        T* plane = input + c * H * W;
        for (size_t dy = 0; dy < kh; ++dy) {
          const int iy = static_cast<int>(oy + dy) - pad_y;
          if (iy < 0 || iy >= static_cast<int>(H)) {
            k += kw;
            continue;
          }
          for (size_t dx = 0; dx < kw; ++dx) {
            const int ix = static_cast<int>(ox + dx) - pad_x;
            if (ix >= 0 && ix < static_cast<int>(W)) plane[iy * W + ix] += row[k];
            ++k;
          }
        }
      }
    }
  }
}

// Stride-1, zero same-padded convolution: input (C,H,W), weights (F,C,kh,kw)
// with odd kernel dims, bias (F) -> output (F,H,W).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias) {
  if (input.rank() != 3) fail(ErrorKind::shape, "conv2d: input must be (C,H,W), got " + input.shape_str());
  if (weights.rank() != 4)
    fail(ErrorKind::shape, "conv2d: weights must be (F,C,kh,kw), got " + weights.shape_str());
  const size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const size_t F = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  if (weights.dim(1) != C)
    fail(ErrorKind::shape, "conv2d: weights " + weights.shape_str() + " do not match input " +
                               input.shape_str());
  if (kh % 2 == 0 || kw % 2 == 0) fail(ErrorKind::shape, "conv2d: kernel dims must be odd");
  if (bias.rank() != 1 || bias.dim(0) != F)
    fail(ErrorKind::shape, "conv2d: bias " + bias.shape_str() + " does not match weights " +
                               weights.shape_str());

  const size_t K = C * kh * kw;
  const size_t S = H * W;
  std::vector<T> rows(S * K);
  im2row(input.data.data(), C, H, W, kh, kw, rows.data());
  TensorT<T> out({F, H, W});
  detail::gemm_rowdot(weights.data.data(), rows.data(), out.data.data(), F, S, K);
  for (size_t f = 0; f < F; ++f) {
    const T b = bias[f];
    T* o = out.data.data() + f * S;
    for (size_t s = 0; s < S; ++s) o[s] += b;
  }
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
  TensorT<T> out = input;
  for (auto& v : out.data) v = std::max(T(0), v);
  return out;
}

// 2x2 window, stride 2, trailing odd row/column dropped.
template <typename T>
TensorT<T> maxpool2(const TensorT<T>& input) {
  if (input.rank() != 3)
    fail(ErrorKind::shape, "maxpool2: input must be (C,H,W), got " + input.shape_str());
  const size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H < 2 || W < 2)
    fail(ErrorKind::shape, "maxpool2: spatial dims must be at least 2x2, got " + input.shape_str());
  const size_t OH = H / 2, OW = W / 2;
  TensorT<T> out({C, OH, OW});
  for (size_t c = 0; c < C; ++c) {
    const T* in = input.data.data() + c * H * W;
    T* o = out.data.data() + c * OH * OW;
    for (size_t y = 0; y < OH; ++y)
      for (size_t x = 0; x < OW; ++x) {
        const size_t iy = 2 * y, ix = 2 * x;
        const T a = in[iy * W + ix], b = in[iy * W + ix + 1];
        const T c2 = in[(iy + 1) * W + ix], d = in[(iy + 1) * W + ix + 1];
        o[y * OW + x] = std::max(std::max(a, b), std::max(c2, d));
      }
  }
  return out;
}

template <typename T>
TensorT<T> dense(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias) {
  if (input.rank() != 1) fail(ErrorKind::shape, "dense: input must be (N), got " + input.shape_str());
  if (weights.rank() != 2 || weights.dim(1) != input.dim(0))
    fail(ErrorKind::shape,
         "dense: weights " + weights.shape_str() + " do not match input " + input.shape_str());
  const size_t M = weights.dim(0), N = weights.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != M)
    fail(ErrorKind::shape, "dense: bias " + bias.shape_str() + " does not match weights " +
                               weights.shape_str());
  TensorT<T> out({M});
  for (size_t m = 0; m < M; ++m) {
    T s = bias[m];
    const T* w = weights.data.data() + m * N;
    for (size_t n = 0; n < N; ++n) s += w[n] * input[n];
    out[m] = s;
  }
  return out;
}

// Max-shifted softmax; numerically stable for |z| up to at least 1e4.
template <typename T>
TensorT<T> softmax(const TensorT<T>& z) {
  if (z.size() == 0) fail(ErrorKind::shape, "softmax: empty input");
  for (T v : z.data)
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "softmax: non-finite input");
  TensorT<T> out = z;
  const T zmax = *std::max_element(z.data.begin(), z.data.end());
  T sum = T(0);
  for (auto& v : out.data) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : out.data) v /= sum;
  return out;
}

// -log of the predicted probability of the true class; probabilities are
// clamped to [1e-12, 1] before the log.
template <typename T>
T cross_entropy(const TensorT<T>& y_true, const TensorT<T>& y_pred) {
  if (!y_true.same_shape(y_pred))
    fail(ErrorKind::shape, "cross_entropy: shapes " + y_true.shape_str() + " vs " +
                               y_pred.shape_str() + " differ");
  size_t ones = 0, hot = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == T(1)) {
      ++ones;
      hot = i;
    } else if (y_true[i] != T(0)) {
      fail(ErrorKind::invalid_argument, "cross_entropy: y is not one-hot");
    }
  }
  if (ones != 1) fail(ErrorKind::invalid_argument, "cross_entropy: y is not one-hot");
  const T p = std::clamp(y_pred[hot], T(1e-12), T(1));
  return -std::log(p);
}

}  // namespace amqc
