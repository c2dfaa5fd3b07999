#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace gcl {

/// Dense row-major double tensor, rank 0..4. Rank 0 is a scalar with size 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        assert(static_cast<int64_t>(data_.size()) == count(shape_));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }
    static Tensor scalar(double v) { return Tensor({}, {v}); }

    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    int dim() const { return static_cast<int>(shape_.size()); }
    int shape(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-d accessor (n, c, h, w); lighter-rank tensors use operator[].
    double& at(int n, int c, int h, int w) {
        return data_[static_cast<size_t>(((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    double at(int n, int c, int h, int w) const {
        return data_[static_cast<size_t>(((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    double item() const {
        assert(size() == 1);
        return data_[0];
    }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int s : shape) n *= s;
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace gcl
