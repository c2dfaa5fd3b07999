#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gcl/core/tensor.hpp"

namespace gcl::ag {

class Node;
using Var = std::shared_ptr<Node>;

/// One value in the reverse-mode tape. Ops allocate a Node per result and
/// wire a closure that scatters the node's grad into its parents.
class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    Node() = default;
    explicit Node(Tensor v, bool rg = false) : value(std::move(v)), requires_grad(rg) {}

    Tensor& ensure_grad() {
        if (grad.size() != value.size() || !grad.same_shape(value)) grad = Tensor(value.shape());
        return grad;
    }
    void zero_grad() {
        if (grad.size() == value.size() && grad.same_shape(value)) grad.fill(0.0);
    }
    bool has_grad() const { return grad.size() == value.size() && grad.same_shape(value); }
};

bool grad_enabled();

/// Disables tape recording in scope (evaluation / metric forwards).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

Var leaf(Tensor v, bool requires_grad = false);
Var constant(Tensor v);
Var constant_scalar(double v);
/// Value-sharing leaf with no history (stop-gradient).
Var detach(const Var& x);

/// Reverse pass from a scalar root; accumulates into leaf grads.
void backward(const Var& root);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var neg(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var abs_(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// ---- linear algebra ----
Var matmul(const Var& A, const Var& B);
/// y = x * W^T + b; x [N x I], W [O x I], b [O] (pass nullptr Var for no bias).
Var linear(const Var& x, const Var& W, const Var& b);
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// ---- normalization ----
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
                 Tensor& run_var, bool training, double momentum, double eps);
Var batch_norm1d(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
                 Tensor& run_var, bool training, double momentum, double eps);
Var instance_norm2d(const Var& x, const Var& gamma, const Var& beta, double eps);
/// Per-sample scale/bias injection: normalizes each (n, c) plane, then applies
/// scale[n, c] and bias[n, c] coming from another feature stream.
Var adain2d(const Var& x, const Var& scale_nc, const Var& bias_nc, double eps);

// ---- shape / pooling ----
Var reshape(const Var& x, std::vector<int> shape);
Var flatten2(const Var& x);
Var part_avg_pool(const Var& x, int bins);
Var global_avg_pool(const Var& x);
Var avg_pool2x(const Var& x);
Var upsample_nearest2x(const Var& x);

// ---- rows / vectors ----
Var l2_normalize_rows(const Var& x, double eps = 1e-12);
Var slice_row(const Var& x, int row);
Var select_rows(const Var& x, std::vector<int> rows);
Var scale_rows(const Var& x, std::vector<double> factors);
Var slice_cols(const Var& x, int c0, int c1);
Var rowwise_dot(const Var& a, const Var& b);
Var dot(const Var& a, const Var& b);
Var dot_with_const(const Var& a, const Tensor& v);
/// s_k = f . M[idx[k]], with M a fixed matrix (e.g. the memory bank).
Var dots_with_rows(const Var& f, std::shared_ptr<const Tensor> M, std::vector<int> idx);
/// log sum_k exp(scale * s_k)
Var logsumexp_vec(const Var& s, double scale);
Var sum_of(const std::vector<Var>& xs);
Var mean_of(const std::vector<Var>& xs);

}  // namespace gcl::ag
