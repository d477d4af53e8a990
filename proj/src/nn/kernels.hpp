#pragma once

// Row-major GEMM kernels. Every output row of gemm_nn_acc goes through the
// same sequence of floating-point operations whatever its position or the
// row count, so results do not depend on row order or batching.

#include <cstddef>

namespace cmls::nn::kernels {

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn_acc(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
                        double* C)
{
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
        double* c0 = C + i * N;
        double* c1 = c0 + N;
        double* c2 = c1 + N;
        double* c3 = c2 + N;
        const double* a0 = A + i * K;
        const double* a1 = a0 + K;
        const double* a2 = a1 + K;
        const double* a3 = a2 + K;
        for (std::size_t k = 0; k < K; ++k) {
            const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            const double* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) {
                const double bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < M; ++i) {
        double* c = C + i * N;
        const double* a = A + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = a[k];
            const double* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
inline void gemm_tn_acc(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
                        double* C)
{
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
        const double* a = A + i * K;
        const double* b0 = B + i * N;
        const double* b1 = b0 + N;
        const double* b2 = b1 + N;
        const double* b3 = b2 + N;
        for (std::size_t k = 0; k < K; ++k) {
            const double v0 = a[k], v1 = a[K + k], v2 = a[2 * K + k], v3 = a[3 * K + k];
            double* c = C + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
        }
    }
    for (; i < M; ++i) {
        const double* a = A + i * K;
        const double* b = B + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = a[k];
            double* c = C + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// out[C,R] = in[R,C]^T
inline void transpose(std::size_t R, std::size_t C, const double* in, double* out)
{
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out[c * R + r] = in[r * C + c];
}

} // namespace cmls::nn::kernels
