#include "amqc/gemm.hpp"

namespace amqc {

namespace {

// 32 partial sums = four 8-lane accumulator chains on AVX2; hides FMA latency.
// The fixed summation tree keeps results bit-deterministic without fast-math.
inline float dot_f32(const float* __restrict a, const float* __restrict b, size_t K) {
  float acc[32] = {0.0f};
  size_t k = 0;
  for (; k + 32 <= K; k += 32)
    for (int j = 0; j < 32; ++j) acc[j] += a[k + j] * b[k + j];
  for (; k + 8 <= K; k += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[k + j] * b[k + j];
  float tail = 0.0f;
  for (; k < K; ++k) tail += a[k] * b[k];
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  for (int j = 0; j < 8; ++j) {
    s0 += acc[j];
    s1 += acc[8 + j];
    s2 += acc[16 + j];
    s3 += acc[24 + j];
  }
  return ((s0 + s1) + (s2 + s3)) + tail;
}

// Integer adds are associative, so the plain reduction loop is enough: the
// vectorizer recognizes the widening-dot idiom (vpmaddwd on AVX2) and splits
// the accumulator itself. Manual unrolling here would defeat that.
inline int32_t dot_i16(const int16_t* __restrict a, const int16_t* __restrict b, size_t K) {
  int32_t s = 0;
  for (size_t k = 0; k < K; ++k) s += static_cast<int32_t>(a[k]) * static_cast<int32_t>(b[k]);
  return s;
}

}  // namespace

void gemm_rowdot_f32(const float* A, const float* B, float* C, size_t M, size_t N, size_t K) {
  // 2x2 register blocking keeps two A rows and two B rows hot.
  size_t m = 0;
  for (; m + 2 <= M; m += 2) {
    const float* a0 = A + m * K;
    const float* a1 = a0 + K;
    size_t n = 0;
    for (; n + 2 <= N; n += 2) {
      const float* b0 = B + n * K;
      const float* b1 = b0 + K;
      C[m * N + n] = dot_f32(a0, b0, K);
      C[m * N + n + 1] = dot_f32(a0, b1, K);
      C[(m + 1) * N + n] = dot_f32(a1, b0, K);
      C[(m + 1) * N + n + 1] = dot_f32(a1, b1, K);
    }
    for (; n < N; ++n) {
      const float* b0 = B + n * K;
      C[m * N + n] = dot_f32(a0, b0, K);
      C[(m + 1) * N + n] = dot_f32(a1, b0, K);
    }
  }
  for (; m < M; ++m) {
    const float* a0 = A + m * K;
    for (size_t n = 0; n < N; ++n) C[m * N + n] = dot_f32(a0, B + n * K, K);
  }
}

void gemm_rowdot_i16(const int16_t* A, const int16_t* B, int32_t* C, size_t M, size_t N,
                     size_t K) {
  size_t m = 0;
  for (; m + 2 <= M; m += 2) {
    const int16_t* a0 = A + m * K;
    const int16_t* a1 = a0 + K;
    size_t n = 0;
    for (; n + 2 <= N; n += 2) {
      const int16_t* b0 = B + n * K;
      const int16_t* b1 = b0 + K;
      C[m * N + n] = dot_i16(a0, b0, K);
      C[m * N + n + 1] = dot_i16(a0, b1, K);
      C[(m + 1) * N + n] = dot_i16(a1, b0, K);
      C[(m + 1) * N + n + 1] = dot_i16(a1, b1, K);
    }
    for (; n < N; ++n) {
      const int16_t* b0 = B + n * K;
      C[m * N + n] = dot_i16(a0, b0, K);
      C[(m + 1) * N + n] = dot_i16(a1, b0, K);
    }
  }
  for (; m < M; ++m) {
    const int16_t* a0 = A + m * K;
    for (size_t n = 0; n < N; ++n) C[m * N + n] = dot_i16(a0, B + n * K, K);
  }
}

}  // namespace amqc
