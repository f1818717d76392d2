#pragma once

#include <cstddef>
#include <cstdint>

namespace amqc {

// Row-dot GEMM: C[m,n] = dot(A[m,:], B[n,:]) for row-major A[M,K] and B[N,K].
// B holds im2row patches (one row per output pixel), A holds filters, so a
// convolution is one call. Kernels use explicit partial-sum arrays so the
// compiler can vectorize without reassociation flags; results are bit-stable
// for a given binary.
void gemm_rowdot_f32(const float* A, const float* B, float* C, size_t M, size_t N, size_t K);

// Integer variant for the quantized path: 8-bit values widened to i16
// (activation minus zero point, weight as-is), products accumulated in i32.
void gemm_rowdot_i16(const int16_t* A, const int16_t* B, int32_t* C, size_t M, size_t N,
                     size_t K);

}  // namespace amqc
