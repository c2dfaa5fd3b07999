#include <cmath>
#include <vector>

#include "doctest.h"
#include "gcl/core/kernels.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/core/tensor.hpp"

using namespace gcl;

namespace {

std::vector<double> random_vec(int64_t n, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.normal();
    return v;
}

// Direct convolution, no im2col: an independent route used to check the
// im2col+GEMM path.
void conv_direct(const double* x, int C, int H, int W, const double* w, int OC, int K,
                 int stride, int pad, double* y, int OH, int OW) {
    for (int oc = 0; oc < OC; ++oc)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                double s = 0.0;
                for (int c = 0; c < C; ++c)
                    for (int kh = 0; kh < K; ++kh)
                        for (int kw = 0; kw < K; ++kw) {
                            const int ih = oh * stride - pad + kh;
                            const int iw = ow * stride - pad + kw;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            s += x[(static_cast<int64_t>(c) * H + ih) * W + iw] *
                                 w[((static_cast<int64_t>(oc) * C + c) * K + kh) * K + kw];
                        }
                y[(static_cast<int64_t>(oc) * OH + oh) * OW + ow] = s;
            }
}

struct BackendRestore {
    kernels::Backend prev = kernels::backend();
    ~BackendRestore() { kernels::set_backend(prev); }
};

}  // namespace

TEST_CASE("gemm variants: serial and parallel backends agree exactly") {
    BackendRestore restore;
    Rng rng(7);
    const int M = 13, K = 29, N = 31;
    auto A = random_vec(M * K, rng);
    auto B = random_vec(K * N, rng);
    auto Bt = random_vec(N * K, rng);
    auto At = random_vec(K * M, rng);

    std::vector<double> c_ser(M * N), c_par(M * N);

    kernels::set_backend(kernels::Backend::serial);
    kernels::gemm_nn(M, K, N, A.data(), B.data(), c_ser.data(), false);
    kernels::set_backend(kernels::Backend::parallel);
    kernels::gemm_nn(M, K, N, A.data(), B.data(), c_par.data(), false);
    for (size_t i = 0; i < c_ser.size(); ++i) CHECK(c_ser[i] == c_par[i]);

    kernels::set_backend(kernels::Backend::serial);
    kernels::gemm_tn(M, K, N, At.data(), B.data(), c_ser.data(), false);
    kernels::set_backend(kernels::Backend::parallel);
    kernels::gemm_tn(M, K, N, At.data(), B.data(), c_par.data(), false);
    for (size_t i = 0; i < c_ser.size(); ++i) CHECK(c_ser[i] == c_par[i]);

    kernels::set_backend(kernels::Backend::serial);
    kernels::gemm_nt(M, K, N, A.data(), Bt.data(), c_ser.data(), false);
    kernels::set_backend(kernels::Backend::parallel);
    kernels::gemm_nt(M, K, N, A.data(), Bt.data(), c_par.data(), false);
    for (size_t i = 0; i < c_ser.size(); ++i) CHECK(c_ser[i] == c_par[i]);
}

TEST_CASE("gemm_nn matches a naive triple loop") {
    Rng rng(3);
    const int M = 5, K = 7, N = 6;
    auto A = random_vec(M * K, rng);
    auto B = random_vec(K * N, rng);
    std::vector<double> C(M * N);
    kernels::gemm_nn(M, K, N, A.data(), B.data(), C.data(), false);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += A[i * K + k] * B[k * N + j];
            CHECK(C[i * N + j] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("gemm transpose variants match definitions") {
    Rng rng(4);
    const int M = 4, K = 5, N = 3;
    auto At = random_vec(K * M, rng);  // stored K x M
    auto B = random_vec(K * N, rng);
    std::vector<double> C(M * N);
    kernels::gemm_tn(M, K, N, At.data(), B.data(), C.data(), false);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += At[k * M + i] * B[k * N + j];
            CHECK(C[i * N + j] == doctest::Approx(s).epsilon(1e-12));
        }

    auto A = random_vec(M * K, rng);
    auto Bt = random_vec(N * K, rng);  // stored N x K
    kernels::gemm_nt(M, K, N, A.data(), Bt.data(), C.data(), false);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += A[i * K + k] * Bt[j * K + k];
            CHECK(C[i * N + j] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("im2col+gemm convolution equals direct convolution") {
    Rng rng(11);
    const int C = 3, H = 10, W = 6, OC = 4, K = 3;
    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            const int OH = (H + 2 * pad - K) / stride + 1;
            const int OW = (W + 2 * pad - K) / stride + 1;
            auto x = random_vec(C * H * W, rng);
            auto w = random_vec(OC * C * K * K, rng);
            std::vector<double> col(static_cast<size_t>(C * K * K) * OH * OW);
            std::vector<double> y(static_cast<size_t>(OC) * OH * OW);
            std::vector<double> y_ref(y.size());
            kernels::im2col(x.data(), C, H, W, K, K, stride, pad, col.data(), OH, OW);
            kernels::gemm_nn(OC, C * K * K, OH * OW, w.data(), col.data(), y.data(), false);
            conv_direct(x.data(), C, H, W, w.data(), OC, K, stride, pad, y_ref.data(), OH, OW);
            for (size_t i = 0; i < y.size(); ++i)
                CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("col2im_add is the adjoint of im2col") {
    // <im2col(x), c> == <x, col2im(c)> for random x, c.
    Rng rng(5);
    const int C = 2, H = 8, W = 5, K = 3, stride = 2, pad = 1;
    const int OH = (H + 2 * pad - K) / stride + 1;
    const int OW = (W + 2 * pad - K) / stride + 1;
    auto x = random_vec(C * H * W, rng);
    auto c = random_vec(static_cast<size_t>(C * K * K) * OH * OW, rng);
    std::vector<double> col(c.size());
    kernels::im2col(x.data(), C, H, W, K, K, stride, pad, col.data(), OH, OW);
    double lhs = 0.0;
    for (size_t i = 0; i < col.size(); ++i) lhs += col[i] * c[i];
    std::vector<double> back(x.size(), 0.0);
    kernels::col2im_add(c.data(), C, H, W, K, K, stride, pad, back.data(), OH, OW);
    double rhs = 0.0;
    for (size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
