#include "gcl/core/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

namespace gcl::kernels {

namespace {
Backend g_backend = backend_from_env();

// Row-range GEMM bodies shared by both backends. The inner loops keep the
// k-accumulation order per output element fixed, so serial and parallel
// dispatch produce identical floating-point results.

void gemm_nn_rows(int K, int N, const double* A, const double* B, double* C, bool acc,
                  int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
        double* c = C + static_cast<int64_t>(i) * N;
        if (!acc) std::memset(c, 0, sizeof(double) * static_cast<size_t>(N));
        const double* a = A + static_cast<int64_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const double av = a[k];
            const double* b = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_tn_rows(int M, int K, int N, const double* A, const double* B, double* C, bool acc,
                  int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
        double* c = C + static_cast<int64_t>(i) * N;
        if (!acc) std::memset(c, 0, sizeof(double) * static_cast<size_t>(N));
        for (int k = 0; k < K; ++k) {
            const double av = A[static_cast<int64_t>(k) * M + i];
            const double* b = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_nt_rows(int K, int N, const double* A, const double* B, double* C, bool acc,
                  int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
        const double* a = A + static_cast<int64_t>(i) * K;
        double* c = C + static_cast<int64_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* b = B + static_cast<int64_t>(j) * K;
            double s = acc ? c[j] : 0.0;
            for (int k = 0; k < K; ++k) s += a[k] * b[k];
            c[j] = s;
        }
    }
}

}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

Backend backend_from_env() {
    const char* v = std::getenv("GCL_BACKEND");
    if (v != nullptr && std::string(v) == "serial") return Backend::serial;
    return Backend::parallel;
}

bool detail::use_parallel() { return g_backend == Backend::parallel; }

void gemm_nn(int M, int K, int N, const double* A, const double* B, double* C, bool acc) {
    if (detail::use_parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < M; ++i) gemm_nn_rows(K, N, A, B, C, acc, i, i + 1);
    } else {
        gemm_nn_rows(K, N, A, B, C, acc, 0, M);
    }
}

void gemm_tn(int M, int K, int N, const double* A, const double* B, double* C, bool acc) {
    if (detail::use_parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < M; ++i) gemm_tn_rows(M, K, N, A, B, C, acc, i, i + 1);
    } else {
        gemm_tn_rows(M, K, N, A, B, C, acc, 0, M);
    }
}

void gemm_nt(int M, int K, int N, const double* A, const double* B, double* C, bool acc) {
    if (detail::use_parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < M; ++i) gemm_nt_rows(K, N, A, B, C, acc, i, i + 1);
    } else {
        gemm_nt_rows(K, N, A, B, C, acc, 0, M);
    }
}

void im2col(const double* x, int C, int H, int W, int KH, int KW, int stride, int pad,
            double* col, int OH, int OW) {
    const int rows = C * KH * KW;
    parallel_for(rows, [&](int64_t r) {
        const int c = static_cast<int>(r) / (KH * KW);
        const int kh = (static_cast<int>(r) / KW) % KH;
        const int kw = static_cast<int>(r) % KW;
        double* out = col + r * (static_cast<int64_t>(OH) * OW);
        const double* xc = x + static_cast<int64_t>(c) * H * W;
        for (int oh = 0; oh < OH; ++oh) {
            const int ih = oh * stride - pad + kh;
            for (int ow = 0; ow < OW; ++ow) {
                const int iw = ow * stride - pad + kw;
                const bool in = ih >= 0 && ih < H && iw >= 0 && iw < W;
                out[static_cast<int64_t>(oh) * OW + ow] = in ? xc[static_cast<int64_t>(ih) * W + iw] : 0.0;
            }
        }
    });
}

void col2im_add(const double* col, int C, int H, int W, int KH, int KW, int stride, int pad,
                double* x_grad, int OH, int OW) {
    // Parallel over channels: each channel's scatter targets are disjoint.
    parallel_for(C, [&](int64_t c) {
        double* xc = x_grad + c * static_cast<int64_t>(H) * W;
        for (int kh = 0; kh < KH; ++kh) {
            for (int kw = 0; kw < KW; ++kw) {
                const int64_t r = (c * KH + kh) * KW + kw;
                const double* in = col + r * (static_cast<int64_t>(OH) * OW);
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw < 0 || iw >= W) continue;
                        xc[static_cast<int64_t>(ih) * W + iw] += in[static_cast<int64_t>(oh) * OW + ow];
                    }
                }
            }
        }
    });
}

}  // namespace gcl::kernels
