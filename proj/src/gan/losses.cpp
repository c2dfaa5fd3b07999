#include "gcl/gan/losses.hpp"

#include <stdexcept>

namespace gcl::gan {

namespace {

ag::Var mae(const ag::Var& a, const ag::Var& b) { return ag::mean_all(ag::abs_(ag::sub(a, b))); }

ag::Var log_sigmoid(const ag::Var& logits) { return ag::neg(ag::softplus(ag::neg(logits))); }

/// Mean over scales of the per-scale patch means of log D (or log(1-D)).
ag::Var mean_log_d(const std::vector<ag::Var>& logit_maps, bool one_minus) {
    std::vector<ag::Var> per_scale;
    per_scale.reserve(logit_maps.size());
    for (const auto& m : logit_maps)
        per_scale.push_back(ag::mean_all(log_sigmoid(one_minus ? ag::neg(m) : m)));
    return ag::mean_of(per_scale);
}

}  // namespace

ag::Var loss_img(const ag::Var& x, const ag::Var& x_ori1, const ag::Var& x_ori2) {
    return ag::add(mae(x, x_ori1), mae(x, x_ori2));
}

ag::Var loss_feat(const ag::Var& f_id, const ag::Var& f_id_new, const ag::Var& f_id_cyc) {
    return ag::add(mae(f_id, f_id_new), mae(f_id, f_id_cyc));
}

AdvLosses adversarial_pair(Discriminator& D, const ag::Var& real, const ag::Var& fake) {
    AdvLosses out;
    auto real_logits = D.forward(real);
    auto fake_detached = D.forward(ag::detach(fake));
    out.d_obj = ag::add(mean_log_d(real_logits, false), mean_log_d(fake_detached, true));
    auto fake_live = D.forward(fake);
    out.g_loss = ag::neg(mean_log_d(fake_live, false));
    return out;
}

AdvLosses loss_adv(Discriminator& D, const ag::Var& x, const ag::Var& x_ori1, const ag::Var& x_new1,
                   const ag::Var& x_ori2) {
    AdvLosses acc;
    auto real_logits = D.forward(x);
    auto real_term = mean_log_d(real_logits, false);
    std::vector<ag::Var> d_terms, g_terms;
    for (const ag::Var& fake : {x_ori1, x_new1, x_ori2}) {
        auto fd = D.forward(ag::detach(fake));
        d_terms.push_back(ag::add(real_term, mean_log_d(fd, true)));
        auto fl = D.forward(fake);
        g_terms.push_back(ag::neg(mean_log_d(fl, false)));
    }
    acc.d_obj = ag::sum_of(d_terms);
    acc.g_loss = ag::sum_of(g_terms);
    return acc;
}

AdvLosses loss_adv_mix(Discriminator& D, const ag::Var& x, const ag::Var& x_mix) {
    return adversarial_pair(D, x, x_mix);
}

ag::Var loss_gan(const ag::Var& l_img, const ag::Var& l_feat, const ag::Var& l_adv,
                 const ag::Var& l_adv_mix, double lambda_recon) {
    return ag::add(ag::scale(ag::add(l_img, l_feat), lambda_recon), ag::add(l_adv, l_adv_mix));
}

double sample_mix_coefficient(double alpha, Rng& rng) {
    if (alpha <= 0.0) throw std::runtime_error("mix coefficient: alpha must be positive");
    const double lambda = rng.beta(alpha, alpha);
    return lambda > 1.0 - lambda ? lambda : 1.0 - lambda;
}

GanBatchOutput rotation_pathway(IdentityEncoder& eid, StructureEncoder& estr, Decoder& dec,
                                const ag::Var& x, const ag::Var& s_ori, const ag::Var& s_new,
                                bool train_eid) {
    GanBatchOutput out;
    auto enc = eid.forward(x, train_eid);
    out.f_id = enc.f_id;
    out.f = enc.f;
    auto fstr_ori = estr.forward(s_ori);
    auto fstr_new = estr.forward(s_new);
    out.x_ori1 = dec.forward(out.f_id, fstr_ori);
    out.x_new1 = dec.forward(out.f_id, fstr_new);
    auto enc_new = eid.forward(out.x_new1, train_eid);
    out.f_id_new = enc_new.f_id;
    out.f_new = enc_new.f;
    out.x_ori2 = dec.forward(out.f_id_new, fstr_ori);
    auto enc_cyc = eid.forward(out.x_ori2, train_eid);
    out.f_id_cyc = enc_cyc.f_id;
    return out;
}

ag::Var mixup_pathway(Decoder& dec, const ag::Var& f_id, const std::vector<int>& partner,
                      const std::vector<double>& lambda_star, const ag::Var& f_str_ori) {
    const int n = f_id->value.shape(0);
    if (static_cast<int>(partner.size()) != n || static_cast<int>(lambda_star.size()) != n)
        throw std::runtime_error("mixup pathway: pairing size mismatch");
    std::vector<double> one_minus(lambda_star.size());
    for (size_t i = 0; i < lambda_star.size(); ++i) one_minus[i] = 1.0 - lambda_star[i];
    auto mixed = ag::add(ag::scale_rows(f_id, lambda_star),
                         ag::scale_rows(ag::select_rows(f_id, partner), one_minus));
    return dec.forward(mixed, f_str_ori);
}

}  // namespace gcl::gan
