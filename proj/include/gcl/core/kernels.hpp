#pragma once

#include <cstdint>

namespace gcl::kernels {

/// Kernel backend: `parallel` runs the OpenMP versions, `serial` the
/// single-thread reference. Both share the same per-element summation
/// order, so results are identical; tests assert exact equality.
enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
/// Reads GCL_BACKEND=serial|parallel from the environment (default parallel).
Backend backend_from_env();

// C[M x N] = A[M x K] * B[K x N]   (+= C when acc)
void gemm_nn(int M, int K, int N, const double* A, const double* B, double* C, bool acc);
// C[M x N] = A^T * B, A stored [K x M]
void gemm_tn(int M, int K, int N, const double* A, const double* B, double* C, bool acc);
// C[M x N] = A * B^T, B stored [N x K]
void gemm_nt(int M, int K, int N, const double* A, const double* B, double* C, bool acc);

/// Unfolds x[C x H x W] into col[(C*KH*KW) x (OH*OW)] for a stride/pad conv.
void im2col(const double* x, int C, int H, int W, int KH, int KW, int stride, int pad,
            double* col, int OH, int OW);
/// Transpose of im2col: accumulates col back into x_grad[C x H x W].
void col2im_add(const double* col, int C, int H, int W, int KH, int KW, int stride, int pad,
                double* x_grad, int OH, int OW);

/// Elementwise parallel loop; f(i) must be independent per index.
template <typename F>
void parallel_for(int64_t n, F&& f);

namespace detail {
bool use_parallel();
}

template <typename F>
void parallel_for(int64_t n, F&& f) {
    if (detail::use_parallel()) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) f(i);
    } else {
        for (int64_t i = 0; i < n; ++i) f(i);
    }
}

}  // namespace gcl::kernels
