#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "gcl/core/autograd.hpp"
#include "gcl/core/rng.hpp"

using namespace gcl;
using ag::Var;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    return t;
}

Var weighted(const Var& t, Rng& rng) {
    Tensor w(t->value.shape());
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
    return ag::sum_all(ag::mul(t, ag::constant(w)));
}

/// Max relative error between analytic and central-difference gradients over
/// every element of every leaf.
double fd_check(const std::vector<Var>& leaves, const std::function<Var()>& loss_fn,
                double h = 1e-6) {
    Var loss = loss_fn();
    for (const auto& l : leaves) l->zero_grad();
    ag::backward(loss);
    std::vector<Tensor> analytic;
    for (const auto& l : leaves) analytic.push_back(l->ensure_grad());

    double worst = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& l = leaves[li];
        for (int64_t i = 0; i < l->value.size(); ++i) {
            const double orig = l->value[i];
            l->value[i] = orig + h;
            const double lp = loss_fn()->value[0];
            l->value[i] = orig - h;
            const double lm = loss_fn()->value[0];
            l->value[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[li][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("elementwise op gradients") {
    Rng rng(1);
    auto x = ag::leaf(random_tensor({3, 4}, rng), true);
    auto y = ag::leaf(random_tensor({3, 4}, rng), true);
    Rng wr(2);

    CHECK(fd_check({x, y}, [&] {
              Rng w(2);
              return weighted(ag::add(ag::mul(x, y), ag::sub(x, y)), w);
          }) < 1e-7);

    // keep values off the relu/abs kinks
    for (int64_t i = 0; i < x->value.size(); ++i)
        if (std::abs(x->value[i]) < 0.05) x->value[i] = 0.1;

    CHECK(fd_check({x}, [&] {
              Rng w(3);
              return weighted(ag::relu(x), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(4);
              return weighted(ag::leaky_relu(x, 0.2), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(5);
              return weighted(ag::sigmoid(x), w);
          }) < 1e-6);
    CHECK(fd_check({x}, [&] {
              Rng w(6);
              return weighted(ag::softplus(x), w);
          }) < 1e-6);
    CHECK(fd_check({x}, [&] {
              Rng w(7);
              return weighted(ag::abs_(x), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] { return ag::mean_all(ag::scale(x, 2.5)); }) < 1e-7);
}

TEST_CASE("matmul, linear and conv gradients") {
    Rng rng(10);
    auto A = ag::leaf(random_tensor({4, 5}, rng), true);
    auto B = ag::leaf(random_tensor({5, 3}, rng), true);
    CHECK(fd_check({A, B}, [&] {
              Rng w(11);
              return weighted(ag::matmul(A, B), w);
          }) < 1e-6);

    auto xl = ag::leaf(random_tensor({6, 5}, rng), true);
    auto W = ag::leaf(random_tensor({4, 5}, rng), true);
    auto b = ag::leaf(random_tensor({4}, rng), true);
    CHECK(fd_check({xl, W, b}, [&] {
              Rng w(12);
              return weighted(ag::linear(xl, W, b), w);
          }) < 1e-6);

    auto xc = ag::leaf(random_tensor({2, 3, 6, 4}, rng), true);
    auto wc = ag::leaf(random_tensor({4, 3, 3, 3}, rng), true);
    auto bc = ag::leaf(random_tensor({4}, rng), true);
    CHECK(fd_check({xc, wc, bc}, [&] {
              Rng w(13);
              return weighted(ag::conv2d(xc, wc, bc, 2, 1), w);
          }) < 1e-5);
}

TEST_CASE("normalization gradients") {
    Rng rng(20);
    auto x = ag::leaf(random_tensor({3, 4, 4, 2}, rng), true);
    auto gamma = ag::leaf(random_tensor({4}, rng), true);
    auto beta = ag::leaf(random_tensor({4}, rng), true);

    SUBCASE("batch norm, training statistics") {
        Tensor rm({4}), rv = Tensor::full({4}, 1.0);
        // forward mutates the running stats; keep them fixed per call
        CHECK(fd_check({x, gamma, beta}, [&] {
                  Tensor rm2 = rm, rv2 = rv;
                  Rng w(21);
                  return weighted(ag::batch_norm2d(x, gamma, beta, rm2, rv2, true, 0.1, 1e-5), w);
              }) < 1e-5);
    }
    SUBCASE("batch norm, eval statistics") {
        Tensor rm = random_tensor({4}, rng, 0.1);
        Tensor rv = Tensor::full({4}, 0.8);
        CHECK(fd_check({x, gamma, beta}, [&] {
                  Rng w(22);
                  return weighted(ag::batch_norm2d(x, gamma, beta, rm, rv, false, 0.1, 1e-5), w);
              }) < 1e-6);
    }
    SUBCASE("instance norm") {
        CHECK(fd_check({x, gamma, beta}, [&] {
                  Rng w(23);
                  return weighted(ag::instance_norm2d(x, gamma, beta, 1e-5), w);
              }) < 1e-5);
    }
    SUBCASE("adain") {
        auto s = ag::leaf(random_tensor({3, 4}, rng), true);
        auto bb = ag::leaf(random_tensor({3, 4}, rng), true);
        CHECK(fd_check({x, s, bb}, [&] {
                  Rng w(24);
                  return weighted(ag::adain2d(x, s, bb, 1e-5), w);
              }) < 1e-5);
    }
    SUBCASE("batch norm 1d") {
        auto x1 = ag::leaf(random_tensor({5, 4}, rng), true);
        Tensor rm({4}), rv = Tensor::full({4}, 1.0);
        CHECK(fd_check({x1, gamma, beta}, [&] {
                  Tensor rm2 = rm, rv2 = rv;
                  Rng w(25);
                  return weighted(ag::batch_norm1d(x1, gamma, beta, rm2, rv2, true, 0.1, 1e-5), w);
              }) < 1e-5);
    }
}

TEST_CASE("pooling, upsampling, reshaping gradients") {
    Rng rng(30);
    auto x = ag::leaf(random_tensor({2, 3, 8, 4}, rng), true);
    CHECK(fd_check({x}, [&] {
              Rng w(31);
              return weighted(ag::part_avg_pool(x, 4), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(32);
              return weighted(ag::global_avg_pool(x), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(33);
              return weighted(ag::avg_pool2x(x), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(34);
              return weighted(ag::upsample_nearest2x(x), w);
          }) < 1e-6);
    CHECK(fd_check({x}, [&] {
              Rng w(35);
              return weighted(ag::flatten2(x), w);
          }) < 1e-7);
}

TEST_CASE("row and vector op gradients") {
    Rng rng(40);
    auto x = ag::leaf(random_tensor({4, 6}, rng), true);
    auto y = ag::leaf(random_tensor({4, 6}, rng), true);

    CHECK(fd_check({x}, [&] {
              Rng w(41);
              return weighted(ag::l2_normalize_rows(x), w);
          }) < 1e-6);
    CHECK(fd_check({x}, [&] {
              Rng w(42);
              return weighted(ag::slice_row(x, 2), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(43);
              return weighted(ag::select_rows(x, {1, 3, 1}), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(44);
              return weighted(ag::scale_rows(x, {0.3, -1.2, 2.0, 0.5}), w);
          }) < 1e-7);
    CHECK(fd_check({x}, [&] {
              Rng w(45);
              return weighted(ag::slice_cols(x, 1, 4), w);
          }) < 1e-7);
    CHECK(fd_check({x, y}, [&] {
              Rng w(46);
              return weighted(ag::rowwise_dot(x, y), w);
          }) < 1e-6);

    auto u = ag::leaf(random_tensor({6}, rng), true);
    auto v = ag::leaf(random_tensor({6}, rng), true);
    CHECK(fd_check({u, v}, [&] { return ag::dot(u, v); }) < 1e-7);

    Tensor cv = random_tensor({6}, rng);
    CHECK(fd_check({u}, [&] { return ag::dot_with_const(u, cv); }) < 1e-7);

    auto M = std::make_shared<Tensor>(random_tensor({5, 6}, rng));
    CHECK(fd_check({u}, [&] {
              Rng w(47);
              return weighted(ag::dots_with_rows(u, M, {0, 2, 4}), w);
          }) < 1e-6);
    CHECK(fd_check({u}, [&] {
              return ag::logsumexp_vec(ag::dots_with_rows(u, M, {0, 1, 2, 3, 4}), 1.0 / 0.04);
          }) < 1e-5);
}

TEST_CASE("gradient accumulates across shared consumers") {
    Rng rng(50);
    auto x = ag::leaf(random_tensor({3, 3}, rng), true);
    CHECK(fd_check({x}, [&] {
              auto a = ag::mul(x, x);
              auto b = ag::add(a, x);
              return ag::sum_all(ag::add(b, a));
          }) < 1e-6);
}

TEST_CASE("scalar aggregation ops") {
    Rng rng(60);
    auto a = ag::leaf(Tensor::scalar(1.5), true);
    auto b = ag::leaf(Tensor::scalar(-0.5), true);
    auto c = ag::leaf(Tensor::scalar(2.0), true);
    CHECK(fd_check({a, b, c}, [&] { return ag::mean_of({a, b, c, ag::sum_of({a, c})}); }) < 1e-7);
}

TEST_CASE("no-grad mode skips history") {
    Rng rng(70);
    auto x = ag::leaf(random_tensor({2, 2}, rng), true);
    ag::Var y;
    {
        ag::NoGradGuard ng;
        y = ag::mul(x, x);
    }
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(71);
    auto x = ag::leaf(random_tensor({2, 2}, rng), true);
    auto d = ag::detach(x);
    auto loss = ag::sum_all(ag::mul(d, d));
    CHECK_FALSE(loss->requires_grad);
}
