#pragma once

#include <vector>

#include "gcl/core/autograd.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/gan/networks.hpp"

namespace gcl::gan {

/// l1 image reconstruction: mean absolute error of both pairs, summed.
ag::Var loss_img(const ag::Var& x, const ag::Var& x_ori1, const ag::Var& x_ori2);

/// l1 feature reconstruction between the source identity map and the two
/// re-encoded maps, summed.
ag::Var loss_feat(const ag::Var& f_id, const ag::Var& f_id_new, const ag::Var& f_id_cyc);

struct AdvLosses {
    ag::Var d_obj;   // discriminator objective (maximized by D; fakes detached)
    ag::Var g_loss;  // non-saturating generator term over the same fakes
};

/// One real/fake adversarial pair. The discriminator term is the mean over
/// scales of patch-mean log D(x) + log(1 - D(x_hat)); the generator term is
/// the mean over scales of patch-mean -log D(x_hat).
AdvLosses adversarial_pair(Discriminator& D, const ag::Var& real, const ag::Var& fake);

/// Adversarial loss over the three rotation-pathway generations.
AdvLosses loss_adv(Discriminator& D, const ag::Var& x, const ag::Var& x_ori1, const ag::Var& x_new1,
                   const ag::Var& x_ori2);
/// Adversarial loss for the mixed image.
AdvLosses loss_adv_mix(Discriminator& D, const ag::Var& x, const ag::Var& x_mix);

/// lambda_recon * (L_img + L_feat) + L_adv + L_adv_mix.
ag::Var loss_gan(const ag::Var& l_img, const ag::Var& l_feat, const ag::Var& l_adv,
                 const ag::Var& l_adv_mix, double lambda_recon);

/// Beta(alpha, alpha) draw folded to [0.5, 1]; throws if alpha <= 0.
double sample_mix_coefficient(double alpha, Rng& rng);

struct GanBatchOutput {
    ag::Var x_ori1;    // x reconstructed under its own structure
    ag::Var x_new1;    // x under the rotated structure
    ag::Var x_ori2;    // cycle generation back to the original structure
    ag::Var x_mix;     // mixed-identity generation (null when the pathway is off)
    ag::Var f_id;      // E_id(x) feature map
    ag::Var f;         // E_id(x) identity vector
    ag::Var f_id_new;  // E_id(x_new') feature map
    ag::Var f_new;     // E_id(x_new') identity vector
    ag::Var f_id_cyc;  // E_id(x_ori'') feature map
    ag::Var f_mix;     // E_id(x_mix') identity vector
};

/// Rotation pathway: encodes x, decodes under original and rotated structure,
/// cycles back, re-encodes. `train_eid` toggles batch-norm mode in E_id.
GanBatchOutput rotation_pathway(IdentityEncoder& eid, StructureEncoder& estr, Decoder& dec,
                                const ag::Var& x, const ag::Var& s_ori, const ag::Var& s_new,
                                bool train_eid);

/// Mixed-identity decode: f_id(mix) = l*.f_id[i] + (1-l*).f_id[partner[i]],
/// generated under sample i's own structure features.
ag::Var mixup_pathway(Decoder& dec, const ag::Var& f_id, const std::vector<int>& partner,
                      const std::vector<double>& lambda_star, const ag::Var& f_str_ori);

}  // namespace gcl::gan
