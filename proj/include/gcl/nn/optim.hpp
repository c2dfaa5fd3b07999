#pragma once

#include <cmath>
#include <vector>

#include "gcl/core/autograd.hpp"
#include "gcl/core/kernels.hpp"
#include "gcl/nn/layers.hpp"

namespace gcl::nn {

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params) p.v->zero_grad();
}

class Sgd {
public:
    Sgd() = default;
    Sgd(std::vector<ParamRef> params, double lr, double momentum)
        : params_(std::move(params)), lr_(lr), momentum_(momentum) {
        for (const auto& p : params_) vel_.emplace_back(p.v->value.shape());
    }

    void step() {
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].v;
            if (!p->has_grad()) continue;
            Tensor& v = vel_[i];
            const double lr = lr_;
            const double mom = momentum_;
            kernels::parallel_for(p->value.size(), [&](int64_t j) {
                v[j] = mom * v[j] + p->grad[j];
                p->value[j] -= lr * v[j];
            });
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    std::vector<Tensor>& state() { return vel_; }
    const std::vector<ParamRef>& params() const { return params_; }

private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> vel_;
    double lr_ = 0.0, momentum_ = 0.0;
};

class Adam {
public:
    Adam() = default;
    Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.5, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.emplace_back(p.v->value.shape());
            v_.emplace_back(p.v->value.shape());
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].v;
            if (!p->has_grad()) continue;
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            const double lr = lr_, b1 = beta1_, b2 = beta2_, eps = eps_;
            kernels::parallel_for(p->value.size(), [&](int64_t j) {
                const double g = p->grad[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                const double mh = m[j] / bc1;
                const double vh = v[j] / bc2;
                p->value[j] -= lr * mh / (std::sqrt(vh) + eps);
            });
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::vector<Tensor>& state_m() { return m_; }
    std::vector<Tensor>& state_v() { return v_; }
    const std::vector<ParamRef>& params() const { return params_; }

private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> m_, v_;
    double lr_ = 0.0, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
};

}  // namespace gcl::nn
