#include <cmath>

#include "doctest.h"
#include "gcl/gan/losses.hpp"
#include "gcl/gan/networks.hpp"

using namespace gcl;
using namespace gcl::gan;
using ag::Var;

namespace {

Tensor random_image(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

bool all_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

bool all_finite(const Tensor& t) {
    for (int64_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

void set_params(std::vector<nn::ParamRef>& ps, double v) {
    for (auto& p : ps) p.v->value.fill(v);
}

}  // namespace

TEST_CASE("identity encoder contracts") {
    Rng rng(1);
    NetConfig cfg;
    IdentityEncoder eid(cfg, rng);
    Rng data(2);
    auto x = ag::constant(random_image({4, 3, 64, 32}, data));

    ag::NoGradGuard ng;
    auto enc = eid.forward(x, false);

    CHECK(enc.f_id->value.shape() == std::vector<int>{4, 256, 4, 1});
    CHECK(enc.f->value.shape() == std::vector<int>{4, 64});

    SUBCASE("f rows are unit norm within 1e-6") {
        for (int i = 0; i < 4; ++i) {
            double n = 0.0;
            for (int d = 0; d < 64; ++d) {
                const double v = enc.f->value[i * 64 + d];
                n += v * v;
            }
            CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);
        }
    }
    SUBCASE("eval-mode determinism on an identical copy") {
        auto enc2 = eid.forward(ag::constant(x->value), false);
        CHECK(all_equal(enc.f_id->value, enc2.f_id->value));
        CHECK(all_equal(enc.f->value, enc2.f->value));
    }
    SUBCASE("batched forward equals per-sample forwards in eval mode") {
        for (int i = 0; i < 4; ++i) {
            Tensor single({1, 3, 64, 32});
            for (int64_t j = 0; j < single.size(); ++j) single[j] = x->value[i * single.size() + j];
            auto one = eid.forward(ag::constant(single), false);
            for (int d = 0; d < 64; ++d)
                CHECK(std::abs(one.f->value[d] - enc.f->value[i * 64 + d]) < 1e-5);
            for (int64_t j = 0; j < one.f_id->value.size(); ++j)
                CHECK(std::abs(one.f_id->value[j] - enc.f_id->value[i * one.f_id->value.size() + j]) < 1e-5);
        }
    }
    SUBCASE("wrong spatial shape is an error") {
        auto bad = ag::constant(random_image({1, 3, 32, 32}, data));
        CHECK_THROWS(eid.forward(bad, false));
    }
}

TEST_CASE("structure encoder contracts") {
    Rng rng(3);
    NetConfig cfg;
    StructureEncoder estr(cfg, rng);
    ag::NoGradGuard ng;
    Rng data(4);
    auto s = ag::constant(random_image({2, 1, 64, 32}, data));
    auto f = estr.forward(s);
    CHECK(f->value.shape() == std::vector<int>{2, 16, 16, 8});

    auto f2 = estr.forward(ag::constant(s->value));
    CHECK(all_equal(f->value, f2->value));

    auto zero = ag::constant(Tensor({2, 1, 64, 32}));
    CHECK(all_finite(estr.forward(zero)->value));
}

TEST_CASE("decoder contracts") {
    Rng rng(5);
    NetConfig cfg;
    StructureEncoder estr(cfg, rng);
    Decoder dec(cfg, rng);
    ag::NoGradGuard ng;
    Rng data(6);
    auto f_id = ag::constant(random_image({2, 256, 4, 1}, data, -1.0, 1.0));
    auto f_str = estr.forward(ag::constant(random_image({2, 1, 64, 32}, data)));

    auto img = dec.forward(f_id, f_str);
    CHECK(img->value.shape() == std::vector<int>{2, 3, 64, 32});
    for (int64_t i = 0; i < img->value.size(); ++i) {
        CHECK(img->value[i] >= 0.0);
        CHECK(img->value[i] <= 1.0);
    }
    auto img2 = dec.forward(ag::constant(f_id->value), f_str);
    CHECK(all_equal(img->value, img2->value));

    auto bad = ag::constant(random_image({2, 256, 2, 1}, data));
    CHECK_THROWS(dec.forward(bad, f_str));
}

TEST_CASE("discriminator contracts") {
    Rng rng(7);
    NetConfig cfg;
    Discriminator D(cfg, rng);
    ag::NoGradGuard ng;
    Rng data(8);
    auto x = ag::constant(random_image({2, 3, 64, 32}, data));

    auto maps = D.forward(x);
    REQUIRE(maps.size() == 3);
    int64_t prev = maps[0]->value.shape(2) * static_cast<int64_t>(maps[0]->value.shape(3));
    for (size_t s = 1; s < maps.size(); ++s) {
        const int64_t cur = maps[s]->value.shape(2) * static_cast<int64_t>(maps[s]->value.shape(3));
        CHECK(cur < prev);
        prev = cur;
    }

    auto maps2 = D.forward(ag::constant(x->value));
    for (size_t s = 0; s < maps.size(); ++s) CHECK(all_equal(maps[s]->value, maps2[s]->value));

    auto zero_maps = D.forward(ag::constant(Tensor({1, 3, 64, 32})));
    for (const auto& m : zero_maps) CHECK(all_finite(m->value));
}

TEST_CASE("image reconstruction loss") {
    Rng rng(9);
    auto x = ag::constant(random_image({2, 3, 8, 4}, rng, 0.0, 0.9));

    SUBCASE("identical inputs give zero") {
        auto l = loss_img(x, ag::constant(x->value), ag::constant(x->value));
        CHECK(l->value[0] == 0.0);
    }
    SUBCASE("constant 0.1 offset on the first pair gives 0.1") {
        Tensor shifted = x->value;
        for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.1;
        auto l = loss_img(x, ag::constant(shifted), ag::constant(x->value));
        CHECK(l->value[0] == doctest::Approx(0.1).epsilon(1e-9));
    }
    SUBCASE("random tensors match a brute-force elementwise oracle") {
        Rng r2(10);
        Tensor a = random_image({2, 3, 8, 4}, r2), b = random_image({2, 3, 8, 4}, r2);
        auto l = loss_img(x, ag::constant(a), ag::constant(b));
        double s1 = 0.0, s2 = 0.0;
        for (int64_t i = 0; i < a.size(); ++i) {
            s1 += std::abs(x->value[i] - a[i]);
            s2 += std::abs(x->value[i] - b[i]);
        }
        const double oracle = s1 / a.size() + s2 / a.size();
        CHECK(l->value[0] == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("feature reconstruction loss") {
    Rng rng(11);
    auto f = ag::constant(random_image({2, 16, 4, 1}, rng, -1.0, 1.0));

    auto zero = loss_feat(f, ag::constant(f->value), ag::constant(f->value));
    CHECK(zero->value[0] == 0.0);

    Tensor shifted = f->value;
    for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.5;
    auto l = loss_feat(f, ag::constant(f->value), ag::constant(shifted));
    CHECK(l->value[0] == doctest::Approx(0.5).epsilon(1e-9));

    Rng r2(12);
    Tensor a = random_image({2, 16, 4, 1}, r2, -1.0, 1.0);
    Tensor b = random_image({2, 16, 4, 1}, r2, -1.0, 1.0);
    auto lr = loss_feat(f, ag::constant(a), ag::constant(b));
    double s1 = 0.0, s2 = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        s1 += std::abs(f->value[i] - a[i]);
        s2 += std::abs(f->value[i] - b[i]);
    }
    CHECK(lr->value[0] == doctest::Approx(s1 / a.size() + s2 / a.size()).epsilon(1e-12));
}

TEST_CASE("adversarial losses") {
    Rng rng(13);
    NetConfig cfg;
    Rng data(14);
    auto x = ag::constant(random_image({1, 3, 64, 32}, data));
    auto fake = ag::constant(random_image({1, 3, 64, 32}, data));

    SUBCASE("a zeroed discriminator outputs 0.5 everywhere: pair objective is 2 log 0.5") {
        Discriminator D(cfg, rng);
        std::vector<nn::ParamRef> ps;
        D.collect(ps);
        set_params(ps, 0.0);
        auto pair = adversarial_pair(D, x, fake);
        CHECK(pair.d_obj->value[0] == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
        auto full = loss_adv(D, x, fake, fake, fake);
        CHECK(full.d_obj->value[0] == doctest::Approx(3.0 * 2.0 * std::log(0.5)).epsilon(1e-12));
    }
    SUBCASE("generator loss vanishes when D(fake) is saturated at 1") {
        Discriminator D(cfg, rng);
        std::vector<nn::ParamRef> ps;
        D.collect(ps);
        set_params(ps, 0.0);
        // bias of every final conv pushed high -> sigmoid(logit) ~= 1
        for (auto& p : ps)
            if (p.name.find(".c3.b") != std::string::npos) p.v->value.fill(60.0);
        auto pair = adversarial_pair(D, x, fake);
        CHECK(std::abs(pair.g_loss->value[0]) < 1e-9);
    }
    SUBCASE("generator gradient w.r.t. generated pixels matches finite differences") {
        NetConfig tiny;
        tiny.height = 8;
        tiny.width = 4;
        tiny.disc_scales = 2;
        Discriminator D(tiny, rng);
        auto real = ag::constant(random_image({1, 3, 8, 4}, data));
        auto gen = ag::leaf(random_image({1, 3, 8, 4}, data), true);

        auto pair = adversarial_pair(D, real, gen);
        gen->zero_grad();
        ag::backward(pair.g_loss);
        Tensor analytic = gen->grad;

        double worst = 0.0;
        const double h = 1e-5;
        for (int64_t i = 0; i < gen->value.size(); ++i) {
            const double orig = gen->value[i];
            gen->value[i] = orig + h;
            const double lp = adversarial_pair(D, real, gen).g_loss->value[0];
            gen->value[i] = orig - h;
            const double lm = adversarial_pair(D, real, gen).g_loss->value[0];
            gen->value[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
            worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("overall gan loss arithmetic") {
    auto one = [] { return ag::constant_scalar(1.0); };
    auto l = loss_gan(one(), one(), one(), one(), 5.0);
    CHECK(l->value[0] == doctest::Approx(12.0).epsilon(1e-15));

    auto zero = [] { return ag::constant_scalar(0.0); };
    auto l2 = loss_gan(zero(), zero(), ag::constant_scalar(0.7), ag::constant_scalar(0.3), 5.0);
    CHECK(l2->value[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mix coefficient sampling") {
    Rng rng(15);
    CHECK_THROWS(sample_mix_coefficient(0.0, rng));
    CHECK_THROWS(sample_mix_coefficient(-1.0, rng));
    for (int i = 0; i < 2000; ++i) {
        const double l = sample_mix_coefficient(0.6, rng);
        CHECK(l >= 0.5);
        CHECK(l <= 1.0);
    }
}

TEST_CASE("rotation pathway") {
    Rng rng(16);
    NetConfig cfg;
    IdentityEncoder eid(cfg, rng);
    StructureEncoder estr(cfg, rng);
    Decoder dec(cfg, rng);
    Rng data(17);
    auto x = ag::constant(random_image({2, 3, 64, 32}, data));
    auto s_ori = ag::constant(random_image({2, 1, 64, 32}, data));

    SUBCASE("forcing s_new = s_ori makes x_new' equal x_ori'") {
        ag::NoGradGuard ng;
        auto out = rotation_pathway(eid, estr, dec, x, s_ori, ag::constant(s_ori->value), false);
        CHECK(all_equal(out.x_ori1->value, out.x_new1->value));
    }
    SUBCASE("outputs live in [0,1] with input shapes") {
        ag::NoGradGuard ng;
        auto s_new = ag::constant(random_image({2, 1, 64, 32}, data));
        auto out = rotation_pathway(eid, estr, dec, x, s_ori, s_new, false);
        for (const Var& img : {out.x_ori1, out.x_new1, out.x_ori2}) {
            CHECK(img->value.shape() == x->value.shape());
            for (int64_t i = 0; i < img->value.size(); ++i) {
                CHECK(img->value[i] >= 0.0);
                CHECK(img->value[i] <= 1.0);
            }
        }
        CHECK(out.x_mix == nullptr);
    }
    SUBCASE("reconstruction-loss gradient vs finite differences on a 3-parameter probe") {
        auto s_new = ag::constant(random_image({2, 1, 64, 32}, data));
        std::vector<nn::ParamRef> dec_params;
        dec.collect(dec_params);
        // one element each from three different decoder tensors
        std::vector<std::pair<ag::Var, int64_t>> probes = {
            {dec_params[2].v, 0},   // entry conv weight
            {dec_params[10].v, 3},  // a block conv weight
            {dec_params.back().v, 1}};

        auto recon = [&]() {
            auto out = rotation_pathway(eid, estr, dec, x, s_ori, s_new, false);
            return ag::add(loss_img(x, out.x_ori1, out.x_ori2),
                           loss_feat(out.f_id, out.f_id_new, out.f_id_cyc));
        };
        auto loss = recon();
        for (auto& [v, idx] : probes) v->zero_grad();
        ag::backward(loss);

        const double h = 1e-4;
        for (auto& [v, idx] : probes) {
            const double analytic = v->grad[idx];
            const double orig = v->value[idx];
            v->value[idx] = orig + h;
            const double lp = [&] {
                ag::NoGradGuard ng;
                return recon()->value[0];
            }();
            v->value[idx] = orig - h;
            const double lm = [&] {
                ag::NoGradGuard ng;
                return recon()->value[0];
            }();
            v->value[idx] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
            CHECK(std::abs(fd - analytic) / denom < 1e-3);
        }
    }
}

TEST_CASE("mixup pathway") {
    Rng rng(18);
    NetConfig cfg;
    IdentityEncoder eid(cfg, rng);
    StructureEncoder estr(cfg, rng);
    Decoder dec(cfg, rng);
    Rng data(19);
    auto x = ag::constant(random_image({2, 3, 64, 32}, data));
    auto s_ori = ag::constant(random_image({2, 1, 64, 32}, data));

    ag::NoGradGuard ng;
    auto enc = eid.forward(x, false);
    auto f_str = estr.forward(s_ori);
    auto plain = dec.forward(enc.f_id, f_str);

    SUBCASE("lambda* = 1 reduces to the plain reconstruction") {
        auto mix = mixup_pathway(dec, enc.f_id, {1, 0}, {1.0, 1.0}, f_str);
        CHECK(all_equal(mix->value, plain->value));
    }
    SUBCASE("x_j = x_i reduces to the plain reconstruction for any lambda*") {
        auto mix = mixup_pathway(dec, enc.f_id, {0, 1}, {0.7, 0.6}, f_str);
        for (int64_t i = 0; i < mix->value.size(); ++i)
            CHECK(mix->value[i] == doctest::Approx(plain->value[i]).epsilon(1e-10));
    }
    SUBCASE("mixed features are the elementwise interpolation at lambda* = 0.7") {
        auto mixed = ag::add(ag::scale_rows(enc.f_id, {0.7, 0.7}),
                             ag::scale_rows(ag::select_rows(enc.f_id, {1, 0}), {0.3, 0.3}));
        const int64_t len = enc.f_id->value.size() / 2;
        for (int64_t i = 0; i < len; ++i) {
            const double want = 0.7 * enc.f_id->value[i] + 0.3 * enc.f_id->value[len + i];
            CHECK(mixed->value[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
    SUBCASE("pairing size mismatch is an error") {
        CHECK_THROWS(mixup_pathway(dec, enc.f_id, {1}, {0.7}, f_str));
    }
}
