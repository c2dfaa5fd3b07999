#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gcl/core/autograd.hpp"
#include "gcl/core/rng.hpp"

namespace gcl::nn {

/// Named trainable tensor; collection order defines checkpoint layout.
struct ParamRef {
    std::string name;
    ag::Var v;
};

/// Named non-trainable state (running statistics).
struct BufferRef {
    std::string name;
    Tensor* t;
};

inline ag::Var make_param(Tensor t) { return ag::leaf(std::move(t), true); }

inline Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, int stride, int pad, bool bias, Rng& rng)
        : stride_(stride), pad_(pad) {
        w_ = make_param(he_normal({out_c, in_c, k, k}, in_c * k * k, rng));
        if (bias) b_ = make_param(Tensor({out_c}));
    }
    ag::Var forward(const ag::Var& x) const { return ag::conv2d(x, w_, b_, stride_, pad_); }
    void collect(const std::string& p, std::vector<ParamRef>& ps) {
        ps.push_back({p + ".w", w_});
        if (b_) ps.push_back({p + ".b", b_});
    }

private:
    ag::Var w_, b_;
    int stride_ = 1, pad_ = 0;
};

class Linear {
public:
    Linear() = default;
    Linear(int in_f, int out_f, bool bias, Rng& rng) {
        w_ = make_param(he_normal({out_f, in_f}, in_f, rng));
        if (bias) b_ = make_param(Tensor({out_f}));
    }
    ag::Var forward(const ag::Var& x) const { return ag::linear(x, w_, b_); }
    void collect(const std::string& p, std::vector<ParamRef>& ps) {
        ps.push_back({p + ".w", w_});
        if (b_) ps.push_back({p + ".b", b_});
    }

private:
    ag::Var w_, b_;
};

class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(int c)
        : gamma_(make_param(Tensor::full({c}, 1.0))),
          beta_(make_param(Tensor({c}))),
          run_mean_({c}),
          run_var_(Tensor::full({c}, 1.0)) {}
    ag::Var forward(const ag::Var& x, bool training) {
        return ag::batch_norm2d(x, gamma_, beta_, run_mean_, run_var_, training, momentum_, eps_);
    }
    void collect(const std::string& p, std::vector<ParamRef>& ps, std::vector<BufferRef>& bs) {
        ps.push_back({p + ".gamma", gamma_});
        ps.push_back({p + ".beta", beta_});
        bs.push_back({p + ".run_mean", &run_mean_});
        bs.push_back({p + ".run_var", &run_var_});
    }

private:
    ag::Var gamma_, beta_;
    Tensor run_mean_, run_var_;
    double momentum_ = 0.1, eps_ = 1e-5;
};

class BatchNorm1d {
public:
    BatchNorm1d() = default;
    explicit BatchNorm1d(int c)
        : gamma_(make_param(Tensor::full({c}, 1.0))),
          beta_(make_param(Tensor({c}))),
          run_mean_({c}),
          run_var_(Tensor::full({c}, 1.0)) {}
    ag::Var forward(const ag::Var& x, bool training) {
        return ag::batch_norm1d(x, gamma_, beta_, run_mean_, run_var_, training, momentum_, eps_);
    }
    void collect(const std::string& p, std::vector<ParamRef>& ps, std::vector<BufferRef>& bs) {
        ps.push_back({p + ".gamma", gamma_});
        ps.push_back({p + ".beta", beta_});
        bs.push_back({p + ".run_mean", &run_mean_});
        bs.push_back({p + ".run_var", &run_var_});
    }

private:
    ag::Var gamma_, beta_;
    Tensor run_mean_, run_var_;
    double momentum_ = 0.1, eps_ = 1e-5;
};

class InstanceNorm2d {
public:
    InstanceNorm2d() = default;
    explicit InstanceNorm2d(int c)
        : gamma_(make_param(Tensor::full({c}, 1.0))), beta_(make_param(Tensor({c}))) {}
    ag::Var forward(const ag::Var& x) const { return ag::instance_norm2d(x, gamma_, beta_, eps_); }
    void collect(const std::string& p, std::vector<ParamRef>& ps) {
        ps.push_back({p + ".gamma", gamma_});
        ps.push_back({p + ".beta", beta_});
    }

private:
    ag::Var gamma_, beta_;
    double eps_ = 1e-5;
};

}  // namespace gcl::nn
