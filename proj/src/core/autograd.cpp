#include "gcl/core/autograd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <unordered_set>

#include "gcl/core/kernels.hpp"

namespace gcl::ag {

namespace {

bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<Var>& ps) {
    for (const auto& p : ps)
        if (p && p->requires_grad) return true;
    return false;
}

/// Builds a result node; drops history when the tape is off or no parent
/// needs gradients.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>(std::move(value));
    if (g_grad_enabled && any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b) {
    assert(a->value.same_shape(b->value));
    (void)a;
    (void)b;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>(std::move(v), requires_grad);
    return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }
Var constant_scalar(double v) { return leaf(Tensor::scalar(v), false); }

Var detach(const Var& x) { return leaf(x->value, false); }

void backward(const Var& root) {
    assert(root->value.size() == 1);
    // Post-order DFS for a topological order restricted to grad-requiring nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad().fill(0.0);
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b);
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = a->value[i] + b->value[i]; });
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(out), {a, b}, [ap, bp, n](Node& self) {
        if (ap->requires_grad) {
            Tensor& ga = ap->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { ga[i] += self.grad[i]; });
        }
        if (bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { gb[i] += self.grad[i]; });
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b);
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = a->value[i] - b->value[i]; });
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(out), {a, b}, [ap, bp, n](Node& self) {
        if (ap->requires_grad) {
            Tensor& ga = ap->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { ga[i] += self.grad[i]; });
        }
        if (bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { gb[i] -= self.grad[i]; });
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b);
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = a->value[i] * b->value[i]; });
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(out), {a, b}, [ap, bp, n](Node& self) {
        if (ap->requires_grad) {
            Tensor& ga = ap->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { ga[i] += self.grad[i] * bp->value[i]; });
        }
        if (bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            kernels::parallel_for(n, [&](int64_t i) { gb[i] += self.grad[i] * ap->value[i]; });
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = a->value[i] * c; });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, c, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) { ga[i] += self.grad[i] * c; });
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0; });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) {
            if (ap->value[i] > 0.0) ga[i] += self.grad[i];
        });
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) {
        out[i] = a->value[i] > 0.0 ? a->value[i] : slope * a->value[i];
    });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, slope, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) {
            ga[i] += self.grad[i] * (ap->value[i] > 0.0 ? 1.0 : slope);
        });
    });
}

Var sigmoid(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) {
        const double x = a->value[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) {
            const double y = self.value[i];
            ga[i] += self.grad[i] * y * (1.0 - y);
        });
    });
}

Var softplus(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) {
        const double x = a->value[i];
        out[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) {
            const double x = ap->value[i];
            const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            ga[i] += self.grad[i] * s;
        });
    });
}

Var abs_(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.size();
    kernels::parallel_for(n, [&](int64_t i) { out[i] = std::abs(a->value[i]); });
    Node* ap = a.get();
    return make_node(std::move(out), {a}, [ap, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        kernels::parallel_for(n, [&](int64_t i) {
            const double x = ap->value[i];
            ga[i] += self.grad[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
        });
    });
}

Var sum_all(const Var& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
    Node* ap = a.get();
    const int64_t n = a->value.size();
    return make_node(Tensor::scalar(s), {a}, [ap, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        const double g = self.grad[0];
        kernels::parallel_for(n, [&](int64_t i) { ga[i] += g; });
    });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a->value.size())); }

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var matmul(const Var& A, const Var& B) {
    assert(A->value.dim() == 2 && B->value.dim() == 2);
    const int M = A->value.shape(0), K = A->value.shape(1), N = B->value.shape(1);
    assert(B->value.shape(0) == K);
    Tensor out({M, N});
    kernels::gemm_nn(M, K, N, A->value.data(), B->value.data(), out.data(), false);
    Node* ap = A.get();
    Node* bp = B.get();
    return make_node(std::move(out), {A, B}, [ap, bp, M, K, N](Node& self) {
        if (ap->requires_grad) {
            Tensor& ga = ap->ensure_grad();
            kernels::gemm_nt(M, N, K, self.grad.data(), bp->value.data(), ga.data(), true);
        }
        if (bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            kernels::gemm_tn(K, M, N, ap->value.data(), self.grad.data(), gb.data(), true);
        }
    });
}

Var linear(const Var& x, const Var& W, const Var& b) {
    assert(x->value.dim() == 2 && W->value.dim() == 2);
    const int N = x->value.shape(0), I = x->value.shape(1), O = W->value.shape(0);
    assert(W->value.shape(1) == I);
    Tensor out({N, O});
    kernels::gemm_nt(N, I, O, x->value.data(), W->value.data(), out.data(), false);
    if (b) {
        assert(b->value.size() == O);
        kernels::parallel_for(N, [&](int64_t r) {
            double* row = out.data() + r * O;
            for (int o = 0; o < O; ++o) row[o] += b->value[o];
        });
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, W, b} : std::vector<Var>{x, W};
    Node* xp = x.get();
    Node* wp = W.get();
    Node* bp = b ? b.get() : nullptr;
    return make_node(std::move(out), std::move(parents), [xp, wp, bp, N, I, O](Node& self) {
        if (xp->requires_grad) {
            Tensor& gx = xp->ensure_grad();
            kernels::gemm_nn(N, O, I, self.grad.data(), wp->value.data(), gx.data(), true);
        }
        if (wp->requires_grad) {
            Tensor& gw = wp->ensure_grad();
            kernels::gemm_tn(O, N, I, self.grad.data(), xp->value.data(), gw.data(), true);
        }
        if (bp != nullptr && bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int o = 0; o < O; ++o) gb[o] += self.grad[static_cast<int64_t>(n) * O + o];
        }
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    assert(x->value.dim() == 4 && w->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    const int OC = w->value.shape(0), KH = w->value.shape(2), KW = w->value.shape(3);
    assert(w->value.shape(1) == C);
    const int OH = (H + 2 * pad - KH) / stride + 1;
    const int OW = (W + 2 * pad - KW) / stride + 1;
    const int CKK = C * KH * KW;
    const int P = OH * OW;

    Tensor out({N, OC, OH, OW});
    Tensor col({CKK, P});
    for (int n = 0; n < N; ++n) {
        kernels::im2col(x->value.data() + static_cast<int64_t>(n) * C * H * W, C, H, W, KH, KW,
                        stride, pad, col.data(), OH, OW);
        kernels::gemm_nn(OC, CKK, P, w->value.data(), col.data(),
                         out.data() + static_cast<int64_t>(n) * OC * P, false);
    }
    if (b) {
        assert(b->value.size() == OC);
        kernels::parallel_for(static_cast<int64_t>(N) * OC, [&](int64_t i) {
            const int oc = static_cast<int>(i % OC);
            double* o = out.data() + i * P;
            const double bias = b->value[oc];
            for (int p = 0; p < P; ++p) o[p] += bias;
        });
    }

    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    Node* xp = x.get();
    Node* wp = w.get();
    Node* bp = b ? b.get() : nullptr;
    return make_node(std::move(out), std::move(parents),
                     [xp, wp, bp, N, C, H, W, OC, KH, KW, stride, pad, OH, OW, CKK, P](Node& self) {
                         Tensor col({CKK, P});
                         Tensor gcol({CKK, P});
                         const bool need_x = xp->requires_grad;
                         const bool need_w = wp->requires_grad;
                         if (need_x) xp->ensure_grad();
                         if (need_w) wp->ensure_grad();
                         for (int n = 0; n < N; ++n) {
                             const double* gn = self.grad.data() + static_cast<int64_t>(n) * OC * P;
                             if (need_w) {
                                 kernels::im2col(xp->value.data() + static_cast<int64_t>(n) * C * H * W,
                                                 C, H, W, KH, KW, stride, pad, col.data(), OH, OW);
                                 kernels::gemm_nt(OC, P, CKK, gn, col.data(), wp->grad.data(), true);
                             }
                             if (need_x) {
                                 kernels::gemm_tn(CKK, OC, P, wp->value.data(), gn, gcol.data(), false);
                                 kernels::col2im_add(gcol.data(), C, H, W, KH, KW, stride, pad,
                                                     xp->grad.data() + static_cast<int64_t>(n) * C * H * W,
                                                     OH, OW);
                             }
                         }
                         if (bp != nullptr && bp->requires_grad) {
                             Tensor& gb = bp->ensure_grad();
                             for (int n = 0; n < N; ++n)
                                 for (int oc = 0; oc < OC; ++oc) {
                                     const double* gn =
                                         self.grad.data() + (static_cast<int64_t>(n) * OC + oc) * P;
                                     double s = 0.0;
                                     for (int p = 0; p < P; ++p) s += gn[p];
                                     gb[oc] += s;
                                 }
                         }
                     });
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

namespace {

/// Shared batch-norm core. `groups` channels, each with `m` strided members
/// described by an index functor idx(c, j) -> flat offset.
template <typename IndexFn>
Var norm_core(const Var& x, const Var& gamma, const Var& beta, Tensor* run_mean, Tensor* run_var,
              bool training, double momentum, double eps, int C, int64_t m, IndexFn idx) {
    Tensor out(x->value.shape());
    auto mean = std::make_shared<Tensor>(std::vector<int>{C});
    auto inv_std = std::make_shared<Tensor>(std::vector<int>{C});

    if (training || run_mean == nullptr) {
        kernels::parallel_for(C, [&](int64_t c) {
            double s = 0.0;
            for (int64_t j = 0; j < m; ++j) s += x->value[idx(c, j)];
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (int64_t j = 0; j < m; ++j) {
                const double d = x->value[idx(c, j)] - mu;
                v += d * d;
            }
            (*mean)[c] = mu;
            (*inv_std)[c] = 1.0 / std::sqrt(v / static_cast<double>(m) + eps);
        });
        if (run_mean != nullptr) {
            for (int c = 0; c < C; ++c) {
                double v = 1.0 / ((*inv_std)[c] * (*inv_std)[c]) - eps;
                (*run_mean)[c] = (1.0 - momentum) * (*run_mean)[c] + momentum * (*mean)[c];
                (*run_var)[c] = (1.0 - momentum) * (*run_var)[c] + momentum * v;
            }
        }
    } else {
        for (int c = 0; c < C; ++c) {
            (*mean)[c] = (*run_mean)[c];
            (*inv_std)[c] = 1.0 / std::sqrt((*run_var)[c] + eps);
        }
    }

    kernels::parallel_for(C, [&](int64_t c) {
        const double mu = (*mean)[c];
        const double is = (*inv_std)[c];
        const double g = gamma->value[c];
        const double b = beta->value[c];
        for (int64_t j = 0; j < m; ++j) {
            const int64_t k = idx(c, j);
            out[k] = g * ((x->value[k] - mu) * is) + b;
        }
    });

    Node* xp = x.get();
    Node* gp = gamma.get();
    Node* bp = beta.get();
    const bool train_stats = training || run_mean == nullptr;
    return make_node(std::move(out), {x, gamma, beta},
                     [xp, gp, bp, mean, inv_std, C, m, idx, train_stats](Node& self) {
                         Tensor* gx = xp->requires_grad ? &xp->ensure_grad() : nullptr;
                         Tensor* gg = gp->requires_grad ? &gp->ensure_grad() : nullptr;
                         Tensor* gb = bp->requires_grad ? &bp->ensure_grad() : nullptr;
                         kernels::parallel_for(C, [&](int64_t c) {
                             const double mu = (*mean)[c];
                             const double is = (*inv_std)[c];
                             const double gam = gp->value[c];
                             double sum_g = 0.0, sum_gx = 0.0;
                             for (int64_t j = 0; j < m; ++j) {
                                 const int64_t k = idx(c, j);
                                 const double xh = (xp->value[k] - mu) * is;
                                 sum_g += self.grad[k];
                                 sum_gx += self.grad[k] * xh;
                             }
                             if (gg != nullptr) (*gg)[c] += sum_gx;
                             if (gb != nullptr) (*gb)[c] += sum_g;
                             if (gx != nullptr) {
                                 if (train_stats) {
                                     const double mg = sum_g / static_cast<double>(m);
                                     const double mgx = sum_gx / static_cast<double>(m);
                                     for (int64_t j = 0; j < m; ++j) {
                                         const int64_t k = idx(c, j);
                                         const double xh = (xp->value[k] - mu) * is;
                                         (*gx)[k] += gam * is * (self.grad[k] - mg - xh * mgx);
                                     }
                                 } else {
                                     for (int64_t j = 0; j < m; ++j) {
                                         const int64_t k = idx(c, j);
                                         (*gx)[k] += gam * is * self.grad[k];
                                     }
                                 }
                             }
                         });
                     });
}

}  // namespace

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
                 Tensor& run_var, bool training, double momentum, double eps) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t m = static_cast<int64_t>(N) * hw;
    auto idx = [C, hw](int64_t c, int64_t j) {
        const int64_t n = j / hw;
        const int64_t p = j % hw;
        return (n * C + c) * hw + p;
    };
    return norm_core(x, gamma, beta, &run_mean, &run_var, training, momentum, eps, C, m, idx);
}

Var batch_norm1d(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
                 Tensor& run_var, bool training, double momentum, double eps) {
    assert(x->value.dim() == 2);
    const int N = x->value.shape(0), C = x->value.shape(1);
    auto idx = [C](int64_t c, int64_t j) { return j * C + c; };
    return norm_core(x, gamma, beta, &run_mean, &run_var, training, momentum, eps, C,
                     static_cast<int64_t>(N), idx);
}

Var instance_norm2d(const Var& x, const Var& gamma, const Var& beta, double eps) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    const int64_t hw = static_cast<int64_t>(H) * W;

    Tensor out(x->value.shape());
    auto mean = std::make_shared<Tensor>(std::vector<int>{N * C});
    auto inv_std = std::make_shared<Tensor>(std::vector<int>{N * C});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * hw;
        double s = 0.0;
        for (int64_t j = 0; j < hw; ++j) s += xd[j];
        const double mu = s / static_cast<double>(hw);
        double v = 0.0;
        for (int64_t j = 0; j < hw; ++j) {
            const double d = xd[j] - mu;
            v += d * d;
        }
        (*mean)[nc] = mu;
        (*inv_std)[nc] = 1.0 / std::sqrt(v / static_cast<double>(hw) + eps);
        const int c = static_cast<int>(nc % C);
        const double g = gamma->value[c];
        const double b = beta->value[c];
        double* od = out.data() + nc * hw;
        for (int64_t j = 0; j < hw; ++j) od[j] = g * ((xd[j] - mu) * (*inv_std)[nc]) + b;
    });

    Node* xp = x.get();
    Node* gp = gamma.get();
    Node* bp = beta.get();
    return make_node(std::move(out), {x, gamma, beta},
                     [xp, gp, bp, mean, inv_std, N, C, hw](Node& self) {
                         Tensor* gx = xp->requires_grad ? &xp->ensure_grad() : nullptr;
                         // gamma/beta sums accumulate across instances: keep a
                         // per-(n,c) pass then a serial channel reduction.
                         Tensor sum_g({N * C}), sum_gx({N * C});
                         kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
                             const double mu = (*mean)[nc];
                             const double is = (*inv_std)[nc];
                             const double* xd = xp->value.data() + nc * hw;
                             const double* gd = self.grad.data() + nc * hw;
                             double sg = 0.0, sgx = 0.0;
                             for (int64_t j = 0; j < hw; ++j) {
                                 const double xh = (xd[j] - mu) * is;
                                 sg += gd[j];
                                 sgx += gd[j] * xh;
                             }
                             sum_g[nc] = sg;
                             sum_gx[nc] = sgx;
                             if (gx != nullptr) {
                                 const double gam = gp->value[static_cast<int>(nc % C)];
                                 const double mg = sg / static_cast<double>(hw);
                                 const double mgx = sgx / static_cast<double>(hw);
                                 double* gxd = gx->data() + nc * hw;
                                 for (int64_t j = 0; j < hw; ++j) {
                                     const double xh = (xd[j] - mu) * is;
                                     gxd[j] += gam * is * (gd[j] - mg - xh * mgx);
                                 }
                             }
                         });
                         if (gp->requires_grad) {
                             Tensor& gg = gp->ensure_grad();
                             for (int n = 0; n < N; ++n)
                                 for (int c = 0; c < C; ++c) gg[c] += sum_gx[static_cast<int64_t>(n) * C + c];
                         }
                         if (bp->requires_grad) {
                             Tensor& gb = bp->ensure_grad();
                             for (int n = 0; n < N; ++n)
                                 for (int c = 0; c < C; ++c) gb[c] += sum_g[static_cast<int64_t>(n) * C + c];
                         }
                     });
}

Var adain2d(const Var& x, const Var& scale_nc, const Var& bias_nc, double eps) {
    assert(x->value.dim() == 4 && scale_nc->value.dim() == 2);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    assert(scale_nc->value.shape(0) == N && scale_nc->value.shape(1) == C);
    const int64_t hw = static_cast<int64_t>(H) * W;

    Tensor out(x->value.shape());
    auto mean = std::make_shared<Tensor>(std::vector<int>{N * C});
    auto inv_std = std::make_shared<Tensor>(std::vector<int>{N * C});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * hw;
        double s = 0.0;
        for (int64_t j = 0; j < hw; ++j) s += xd[j];
        const double mu = s / static_cast<double>(hw);
        double v = 0.0;
        for (int64_t j = 0; j < hw; ++j) {
            const double d = xd[j] - mu;
            v += d * d;
        }
        (*mean)[nc] = mu;
        (*inv_std)[nc] = 1.0 / std::sqrt(v / static_cast<double>(hw) + eps);
        const double g = scale_nc->value[nc];
        const double b = bias_nc->value[nc];
        double* od = out.data() + nc * hw;
        for (int64_t j = 0; j < hw; ++j) od[j] = g * ((xd[j] - mu) * (*inv_std)[nc]) + b;
    });

    Node* xp = x.get();
    Node* sp = scale_nc.get();
    Node* bp = bias_nc.get();
    return make_node(std::move(out), {x, scale_nc, bias_nc},
                     [xp, sp, bp, mean, inv_std, N, C, hw](Node& self) {
                         Tensor* gx = xp->requires_grad ? &xp->ensure_grad() : nullptr;
                         Tensor* gs = sp->requires_grad ? &sp->ensure_grad() : nullptr;
                         Tensor* gb = bp->requires_grad ? &bp->ensure_grad() : nullptr;
                         kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
                             const double mu = (*mean)[nc];
                             const double is = (*inv_std)[nc];
                             const double* xd = xp->value.data() + nc * hw;
                             const double* gd = self.grad.data() + nc * hw;
                             double sg = 0.0, sgx = 0.0;
                             for (int64_t j = 0; j < hw; ++j) {
                                 const double xh = (xd[j] - mu) * is;
                                 sg += gd[j];
                                 sgx += gd[j] * xh;
                             }
                             if (gs != nullptr) (*gs)[nc] += sgx;
                             if (gb != nullptr) (*gb)[nc] += sg;
                             if (gx != nullptr) {
                                 const double gam = sp->value[nc];
                                 const double mg = sg / static_cast<double>(hw);
                                 const double mgx = sgx / static_cast<double>(hw);
                                 double* gxd = gx->data() + nc * hw;
                                 for (int64_t j = 0; j < hw; ++j) {
                                     const double xh = (xd[j] - mu) * is;
                                     gxd[j] += gam * is * (gd[j] - mg - xh * mgx);
                                 }
                             }
                         });
                     });
}

// ---------------------------------------------------------------------------
// shape / pooling
// ---------------------------------------------------------------------------

Var reshape(const Var& x, std::vector<int> shape) {
    assert(Tensor::count(shape) == x->value.size());
    Tensor out(std::move(shape));
    const int64_t n = out.size();
    for (int64_t i = 0; i < n; ++i) out[i] = x->value[i];
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, n](Node& self) {
        Tensor& gx = xp->ensure_grad();
        for (int64_t i = 0; i < n; ++i) gx[i] += self.grad[i];
    });
}

Var flatten2(const Var& x) {
    assert(x->value.dim() >= 2);
    const int N = x->value.shape(0);
    const int rest = static_cast<int>(x->value.size() / N);
    return reshape(x, {N, rest});
}

Var part_avg_pool(const Var& x, int bins) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    assert(H % bins == 0);
    const int rows = H / bins;
    const double inv = 1.0 / (static_cast<double>(rows) * W);
    Tensor out({N, C, bins, 1});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * H * W;
        double* od = out.data() + nc * bins;
        for (int b = 0; b < bins; ++b) {
            double s = 0.0;
            for (int h = b * rows; h < (b + 1) * rows; ++h)
                for (int w = 0; w < W; ++w) s += xd[static_cast<int64_t>(h) * W + w];
            od[b] = s * inv;
        }
    });
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, N, C, H, W, bins, rows, inv](Node& self) {
        Tensor& gx = xp->ensure_grad();
        kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
            double* gxd = gx.data() + nc * H * W;
            const double* gd = self.grad.data() + nc * bins;
            for (int b = 0; b < bins; ++b) {
                const double g = gd[b] * inv;
                for (int h = b * rows; h < (b + 1) * rows; ++h)
                    for (int w = 0; w < W; ++w) gxd[static_cast<int64_t>(h) * W + w] += g;
            }
        });
    });
}

Var global_avg_pool(const Var& x) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    const int64_t hw = static_cast<int64_t>(H) * W;
    const double inv = 1.0 / static_cast<double>(hw);
    Tensor out({N, C});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * hw;
        double s = 0.0;
        for (int64_t j = 0; j < hw; ++j) s += xd[j];
        out[nc] = s * inv;
    });
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, N, C, hw, inv](Node& self) {
        Tensor& gx = xp->ensure_grad();
        kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
            double* gxd = gx.data() + nc * hw;
            const double g = self.grad[nc] * inv;
            for (int64_t j = 0; j < hw; ++j) gxd[j] += g;
        });
    });
}

Var avg_pool2x(const Var& x) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    assert(H % 2 == 0 && W % 2 == 0);
    const int OH = H / 2, OW = W / 2;
    Tensor out({N, C, OH, OW});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * H * W;
        double* od = out.data() + nc * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                const int h = oh * 2, w = ow * 2;
                od[static_cast<int64_t>(oh) * OW + ow] =
                    0.25 * (xd[static_cast<int64_t>(h) * W + w] + xd[static_cast<int64_t>(h) * W + w + 1] +
                            xd[static_cast<int64_t>(h + 1) * W + w] + xd[static_cast<int64_t>(h + 1) * W + w + 1]);
            }
    });
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, N, C, H, W, OH, OW](Node& self) {
        Tensor& gx = xp->ensure_grad();
        kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
            double* gxd = gx.data() + nc * H * W;
            const double* gd = self.grad.data() + nc * OH * OW;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    const double g = 0.25 * gd[static_cast<int64_t>(oh) * OW + ow];
                    const int h = oh * 2, w = ow * 2;
                    gxd[static_cast<int64_t>(h) * W + w] += g;
                    gxd[static_cast<int64_t>(h) * W + w + 1] += g;
                    gxd[static_cast<int64_t>(h + 1) * W + w] += g;
                    gxd[static_cast<int64_t>(h + 1) * W + w + 1] += g;
                }
        });
    });
}

Var upsample_nearest2x(const Var& x) {
    assert(x->value.dim() == 4);
    const int N = x->value.shape(0), C = x->value.shape(1), H = x->value.shape(2), W = x->value.shape(3);
    const int OH = H * 2, OW = W * 2;
    Tensor out({N, C, OH, OW});
    kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
        const double* xd = x->value.data() + nc * H * W;
        double* od = out.data() + nc * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow)
                od[static_cast<int64_t>(oh) * OW + ow] = xd[static_cast<int64_t>(oh / 2) * W + ow / 2];
    });
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, N, C, H, W, OH, OW](Node& self) {
        Tensor& gx = xp->ensure_grad();
        kernels::parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
            double* gxd = gx.data() + nc * H * W;
            const double* gd = self.grad.data() + nc * OH * OW;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow)
                    gxd[static_cast<int64_t>(oh / 2) * W + ow / 2] += gd[static_cast<int64_t>(oh) * OW + ow];
        });
    });
}

// ---------------------------------------------------------------------------
// rows / vectors
// ---------------------------------------------------------------------------

Var l2_normalize_rows(const Var& x, double eps) {
    assert(x->value.dim() == 2);
    const int N = x->value.shape(0), D = x->value.shape(1);
    Tensor out({N, D});
    auto norms = std::make_shared<Tensor>(std::vector<int>{N});
    for (int i = 0; i < N; ++i) {
        const double* xd = x->value.data() + static_cast<int64_t>(i) * D;
        double s = 0.0;
        for (int d = 0; d < D; ++d) s += xd[d] * xd[d];
        const double r = std::sqrt(s + eps);
        (*norms)[i] = r;
        double* od = out.data() + static_cast<int64_t>(i) * D;
        for (int d = 0; d < D; ++d) od[d] = xd[d] / r;
    }
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, norms, N, D](Node& self) {
        Tensor& gx = xp->ensure_grad();
        for (int i = 0; i < N; ++i) {
            const double* yd = self.value.data() + static_cast<int64_t>(i) * D;
            const double* gd = self.grad.data() + static_cast<int64_t>(i) * D;
            const double r = (*norms)[i];
            double dotv = 0.0;
            for (int d = 0; d < D; ++d) dotv += gd[d] * yd[d];
            double* gxd = gx.data() + static_cast<int64_t>(i) * D;
            for (int d = 0; d < D; ++d) gxd[d] += (gd[d] - yd[d] * dotv) / r;
        }
    });
}

Var slice_row(const Var& x, int row) {
    assert(x->value.dim() >= 2);
    std::vector<int> shape(x->value.shape().begin() + 1, x->value.shape().end());
    const int64_t len = Tensor::count(shape);
    Tensor out(std::move(shape));
    const double* src = x->value.data() + static_cast<int64_t>(row) * len;
    for (int64_t i = 0; i < len; ++i) out[i] = src[i];
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, row, len](Node& self) {
        Tensor& gx = xp->ensure_grad();
        double* dst = gx.data() + static_cast<int64_t>(row) * len;
        for (int64_t i = 0; i < len; ++i) dst[i] += self.grad[i];
    });
}

Var select_rows(const Var& x, std::vector<int> rows) {
    assert(x->value.dim() >= 2);
    std::vector<int> shape = x->value.shape();
    shape[0] = static_cast<int>(rows.size());
    const int64_t len = x->value.size() / x->value.shape(0);
    Tensor out(shape);
    for (size_t r = 0; r < rows.size(); ++r) {
        const double* src = x->value.data() + static_cast<int64_t>(rows[r]) * len;
        double* dst = out.data() + static_cast<int64_t>(r) * len;
        for (int64_t i = 0; i < len; ++i) dst[i] = src[i];
    }
    Node* xp = x.get();
    auto rows_sh = std::make_shared<std::vector<int>>(std::move(rows));
    return make_node(std::move(out), {x}, [xp, rows_sh, len](Node& self) {
        Tensor& gx = xp->ensure_grad();
        for (size_t r = 0; r < rows_sh->size(); ++r) {
            double* dst = gx.data() + static_cast<int64_t>((*rows_sh)[r]) * len;
            const double* src = self.grad.data() + static_cast<int64_t>(r) * len;
            for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
        }
    });
}

Var scale_rows(const Var& x, std::vector<double> factors) {
    assert(x->value.dim() >= 2);
    const int N = x->value.shape(0);
    assert(static_cast<int>(factors.size()) == N);
    const int64_t len = x->value.size() / N;
    Tensor out(x->value.shape());
    for (int r = 0; r < N; ++r) {
        const double f = factors[static_cast<size_t>(r)];
        const double* src = x->value.data() + static_cast<int64_t>(r) * len;
        double* dst = out.data() + static_cast<int64_t>(r) * len;
        for (int64_t i = 0; i < len; ++i) dst[i] = f * src[i];
    }
    Node* xp = x.get();
    auto fs = std::make_shared<std::vector<double>>(std::move(factors));
    return make_node(std::move(out), {x}, [xp, fs, N, len](Node& self) {
        Tensor& gx = xp->ensure_grad();
        for (int r = 0; r < N; ++r) {
            const double f = (*fs)[static_cast<size_t>(r)];
            double* dst = gx.data() + static_cast<int64_t>(r) * len;
            const double* src = self.grad.data() + static_cast<int64_t>(r) * len;
            for (int64_t i = 0; i < len; ++i) dst[i] += f * src[i];
        }
    });
}

Var slice_cols(const Var& x, int c0, int c1) {
    assert(x->value.dim() == 2);
    const int N = x->value.shape(0), D = x->value.shape(1);
    assert(0 <= c0 && c0 < c1 && c1 <= D);
    const int K = c1 - c0;
    Tensor out({N, K});
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < K; ++k) out[static_cast<int64_t>(i) * K + k] = x->value[static_cast<int64_t>(i) * D + c0 + k];
    Node* xp = x.get();
    return make_node(std::move(out), {x}, [xp, N, D, c0, K](Node& self) {
        Tensor& gx = xp->ensure_grad();
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k)
                gx[static_cast<int64_t>(i) * D + c0 + k] += self.grad[static_cast<int64_t>(i) * K + k];
    });
}

Var rowwise_dot(const Var& a, const Var& b) {
    check_same_shape(a, b);
    assert(a->value.dim() == 2);
    const int N = a->value.shape(0), D = a->value.shape(1);
    Tensor out({N});
    for (int i = 0; i < N; ++i) {
        double s = 0.0;
        for (int d = 0; d < D; ++d)
            s += a->value[static_cast<int64_t>(i) * D + d] * b->value[static_cast<int64_t>(i) * D + d];
        out[i] = s;
    }
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(std::move(out), {a, b}, [ap, bp, N, D](Node& self) {
        for (int i = 0; i < N; ++i) {
            const double g = self.grad[i];
            if (ap->requires_grad) {
                Tensor& ga = ap->ensure_grad();
                for (int d = 0; d < D; ++d)
                    ga[static_cast<int64_t>(i) * D + d] += g * bp->value[static_cast<int64_t>(i) * D + d];
            }
            if (bp->requires_grad) {
                Tensor& gb = bp->ensure_grad();
                for (int d = 0; d < D; ++d)
                    gb[static_cast<int64_t>(i) * D + d] += g * ap->value[static_cast<int64_t>(i) * D + d];
            }
        }
    });
}

Var dot(const Var& a, const Var& b) {
    check_same_shape(a, b);
    const int64_t n = a->value.size();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += a->value[i] * b->value[i];
    Node* ap = a.get();
    Node* bp = b.get();
    return make_node(Tensor::scalar(s), {a, b}, [ap, bp, n](Node& self) {
        const double g = self.grad[0];
        if (ap->requires_grad) {
            Tensor& ga = ap->ensure_grad();
            for (int64_t i = 0; i < n; ++i) ga[i] += g * bp->value[i];
        }
        if (bp->requires_grad) {
            Tensor& gb = bp->ensure_grad();
            for (int64_t i = 0; i < n; ++i) gb[i] += g * ap->value[i];
        }
    });
}

Var dot_with_const(const Var& a, const Tensor& v) {
    assert(a->value.size() == v.size());
    const int64_t n = a->value.size();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += a->value[i] * v[i];
    Node* ap = a.get();
    auto vc = std::make_shared<Tensor>(v);
    return make_node(Tensor::scalar(s), {a}, [ap, vc, n](Node& self) {
        Tensor& ga = ap->ensure_grad();
        const double g = self.grad[0];
        for (int64_t i = 0; i < n; ++i) ga[i] += g * (*vc)[i];
    });
}

Var dots_with_rows(const Var& f, std::shared_ptr<const Tensor> M, std::vector<int> idx) {
    assert(f->value.dim() == 1 && M->dim() == 2);
    const int D = f->value.shape(0);
    assert(M->shape(1) == D);
    const int K = static_cast<int>(idx.size());
    Tensor out({K});
    for (int k = 0; k < K; ++k) {
        const double* row = M->data() + static_cast<int64_t>(idx[static_cast<size_t>(k)]) * D;
        double s = 0.0;
        for (int d = 0; d < D; ++d) s += f->value[d] * row[d];
        out[k] = s;
    }
    Node* fp = f.get();
    auto idx_sh = std::make_shared<std::vector<int>>(std::move(idx));
    return make_node(std::move(out), {f}, [fp, M, idx_sh, D, K](Node& self) {
        Tensor& gf = fp->ensure_grad();
        for (int k = 0; k < K; ++k) {
            const double g = self.grad[k];
            const double* row = M->data() + static_cast<int64_t>((*idx_sh)[static_cast<size_t>(k)]) * D;
            for (int d = 0; d < D; ++d) gf[d] += g * row[d];
        }
    });
}

Var logsumexp_vec(const Var& s, double sc) {
    assert(s->value.dim() == 1);
    const int K = s->value.shape(0);
    assert(K >= 1);
    double mx = sc * s->value[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, sc * s->value[k]);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += std::exp(sc * s->value[k] - mx);
    const double lse = mx + std::log(acc);
    auto soft = std::make_shared<Tensor>(std::vector<int>{K});
    for (int k = 0; k < K; ++k) (*soft)[k] = std::exp(sc * s->value[k] - lse);
    Node* sp = s.get();
    return make_node(Tensor::scalar(lse), {s}, [sp, soft, sc, K](Node& self) {
        Tensor& gs = sp->ensure_grad();
        const double g = self.grad[0];
        for (int k = 0; k < K; ++k) gs[k] += g * sc * (*soft)[k];
    });
}

Var sum_of(const std::vector<Var>& xs) {
    assert(!xs.empty());
    double s = 0.0;
    for (const auto& x : xs) {
        assert(x->value.size() == 1);
        s += x->value[0];
    }
    std::vector<Var> parents = xs;
    std::vector<Node*> raw;
    raw.reserve(xs.size());
    for (const auto& x : xs) raw.push_back(x.get());
    return make_node(Tensor::scalar(s), std::move(parents), [raw](Node& self) {
        for (Node* p : raw)
            if (p->requires_grad) p->ensure_grad()[0] += self.grad[0];
    });
}

Var mean_of(const std::vector<Var>& xs) {
    return scale(sum_of(xs), 1.0 / static_cast<double>(xs.size()));
}

}  // namespace gcl::ag
