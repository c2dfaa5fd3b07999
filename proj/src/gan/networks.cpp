#include "gcl/gan/networks.hpp"

namespace gcl::gan {

IdentityEncoder::IdentityEncoder(const NetConfig& cfg, Rng& rng)
    : cfg_(cfg),
      stem_(3, cfg.eid_stem, 3, 2, 1, false, rng),
      stem_bn_(cfg.eid_stem),
      r1_(cfg.eid_stem, cfg.eid_c1, 2, rng),
      r2_(cfg.eid_c1, cfg.eid_c2, 2, rng),
      r3_(cfg.eid_c2, cfg.eid_c3, 2, rng),
      head_(cfg.eid_c3, cfg.fid_channels, 1, 1, 0, false, rng),
      head_bn_(cfg.fid_channels),
      neck_(cfg.fid_channels),
      embed_(cfg.fid_channels, cfg.embed_dim, true, rng) {}

IdentityEncoding IdentityEncoder::forward(const ag::Var& x, bool training) {
    if (x->value.dim() != 4 || x->value.shape(1) != 3 || x->value.shape(2) != cfg_.height ||
        x->value.shape(3) != cfg_.width)
        throw std::runtime_error("identity encoder: wrong input shape");
    auto h = ag::relu(stem_bn_.forward(stem_.forward(x), training));
    h = r1_.forward(h, training);
    h = r2_.forward(h, training);
    h = r3_.forward(h, training);
    h = ag::relu(head_bn_.forward(head_.forward(h), training));

    IdentityEncoding out;
    out.f_id = ag::part_avg_pool(h, cfg_.fid_bins);
    auto pooled = ag::global_avg_pool(h);
    auto neck = neck_.forward(pooled, training);
    out.f = ag::l2_normalize_rows(embed_.forward(neck));
    return out;
}

void IdentityEncoder::collect(std::vector<nn::ParamRef>& ps, std::vector<nn::BufferRef>& bs) {
    stem_.collect("eid.stem", ps);
    stem_bn_.collect("eid.stem_bn", ps, bs);
    r1_.collect("eid.r1", ps, bs);
    r2_.collect("eid.r2", ps, bs);
    r3_.collect("eid.r3", ps, bs);
    head_.collect("eid.head", ps);
    head_bn_.collect("eid.head_bn", ps, bs);
    neck_.collect("eid.neck", ps, bs);
    embed_.collect("eid.embed", ps);
}

StructureEncoder::StructureEncoder(const NetConfig& cfg, Rng& rng)
    : cfg_(cfg),
      c1_(1, cfg.estr_channels / 2, 3, 2, 1, false, rng),
      c2_(cfg.estr_channels / 2, cfg.estr_channels, 3, 2, 1, false, rng),
      c3_(cfg.estr_channels, cfg.estr_channels, 3, 1, 1, false, rng),
      c4_(cfg.estr_channels, cfg.estr_channels, 3, 1, 1, false, rng),
      n1_(cfg.estr_channels / 2),
      n2_(cfg.estr_channels),
      n3_(cfg.estr_channels),
      n4_(cfg.estr_channels) {
    for (int i = 0; i < 4; ++i) blocks_.emplace_back(cfg.estr_channels, rng);
}

ag::Var StructureEncoder::forward(const ag::Var& s) {
    if (s->value.dim() != 4 || s->value.shape(1) != 1 || s->value.shape(2) != cfg_.height ||
        s->value.shape(3) != cfg_.width)
        throw std::runtime_error("structure encoder: wrong input shape");
    auto h = ag::relu(n1_.forward(c1_.forward(s)));
    h = ag::relu(n2_.forward(c2_.forward(h)));
    h = ag::relu(n3_.forward(c3_.forward(h)));
    h = ag::relu(n4_.forward(c4_.forward(h)));
    for (auto& b : blocks_) h = b.forward(h);
    return h;
}

void StructureEncoder::collect(std::vector<nn::ParamRef>& ps) {
    c1_.collect("estr.c1", ps);
    n1_.collect("estr.n1", ps);
    c2_.collect("estr.c2", ps);
    n2_.collect("estr.n2", ps);
    c3_.collect("estr.c3", ps);
    n3_.collect("estr.n3", ps);
    c4_.collect("estr.c4", ps);
    n4_.collect("estr.n4", ps);
    for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("estr.res" + std::to_string(i), ps);
}

Decoder::Decoder(const NetConfig& cfg, Rng& rng)
    : cfg_(cfg),
      style1_(cfg.fid_channels * cfg.fid_bins, cfg.style_hidden, true, rng),
      style2_(cfg.style_hidden, cfg.dec_blocks * 2 * 2 * cfg.dec_channels, true, rng),
      entry_(cfg.estr_channels, cfg.dec_channels, 3, 1, 1, false, rng),
      entry_in_(cfg.dec_channels),
      up1_(cfg.dec_channels, cfg.dec_up1, 3, 1, 1, false, rng),
      up2_(cfg.dec_up1, cfg.dec_up2, 3, 1, 1, false, rng),
      out_(cfg.dec_up2, 3, 3, 1, 1, true, rng),
      up1_in_(cfg.dec_up1),
      up2_in_(cfg.dec_up2) {
    for (int i = 0; i < cfg.dec_blocks; ++i)
        blocks_.push_back({nn::Conv2d(cfg.dec_channels, cfg.dec_channels, 3, 1, 1, false, rng),
                           nn::Conv2d(cfg.dec_channels, cfg.dec_channels, 3, 1, 1, false, rng)});
}

ag::Var Decoder::forward(const ag::Var& f_id, const ag::Var& f_str) {
    if (f_id->value.dim() != 4 || f_id->value.shape(1) != cfg_.fid_channels ||
        f_id->value.shape(2) != cfg_.fid_bins)
        throw std::runtime_error("decoder: bad identity feature shape");
    if (f_str->value.dim() != 4 || f_str->value.shape(1) != cfg_.estr_channels ||
        f_str->value.shape(2) != cfg_.height / 4 || f_str->value.shape(3) != cfg_.width / 4)
        throw std::runtime_error("decoder: bad structure feature shape");
    if (f_id->value.shape(0) != f_str->value.shape(0))
        throw std::runtime_error("decoder: batch size mismatch");

    // style vector -> per-AdaIN (scale, bias); scales are residual around 1
    auto style = style2_.forward(ag::relu(style1_.forward(ag::flatten2(f_id))));
    const int C = cfg_.dec_channels;
    int offset = 0;
    auto next_scale = [&](int) {
        auto raw = ag::slice_cols(style, offset, offset + C);
        offset += C;
        return ag::add(raw, ag::constant(Tensor::full({style->value.shape(0), C}, 1.0)));
    };
    auto next_bias = [&](int) {
        auto b = ag::slice_cols(style, offset, offset + C);
        offset += C;
        return b;
    };

    auto h = ag::relu(entry_in_.forward(entry_.forward(f_str)));
    for (auto& blk : blocks_) {
        auto r = blk.conv1.forward(h);
        r = ag::relu(ag::adain2d(r, next_scale(C), next_bias(C), 1e-5));
        r = blk.conv2.forward(r);
        r = ag::adain2d(r, next_scale(C), next_bias(C), 1e-5);
        h = ag::add(h, r);
    }
    h = ag::relu(up1_in_.forward(up1_.forward(ag::upsample_nearest2x(h))));
    h = ag::relu(up2_in_.forward(up2_.forward(ag::upsample_nearest2x(h))));
    return ag::sigmoid(out_.forward(h));
}

void Decoder::collect(std::vector<nn::ParamRef>& ps) {
    style1_.collect("dec.style1", ps);
    style2_.collect("dec.style2", ps);
    entry_.collect("dec.entry", ps);
    entry_in_.collect("dec.entry_in", ps);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].conv1.collect("dec.blk" + std::to_string(i) + ".conv1", ps);
        blocks_[i].conv2.collect("dec.blk" + std::to_string(i) + ".conv2", ps);
    }
    up1_.collect("dec.up1", ps);
    up1_in_.collect("dec.up1_in", ps);
    up2_.collect("dec.up2", ps);
    up2_in_.collect("dec.up2_in", ps);
    out_.collect("dec.out", ps);
}

Discriminator::Discriminator(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
    for (int s = 0; s < cfg.disc_scales; ++s) {
        Scale sc{nn::Conv2d(3, cfg.disc_base, 3, 2, 1, true, rng),
                 nn::Conv2d(cfg.disc_base, cfg.disc_base * 2, 3, 2, 1, false, rng),
                 nn::Conv2d(cfg.disc_base * 2, 1, 3, 1, 1, true, rng),
                 nn::InstanceNorm2d(cfg.disc_base * 2)};
        scales_.push_back(std::move(sc));
    }
}

std::vector<ag::Var> Discriminator::forward(const ag::Var& x) {
    if (x->value.dim() != 4 || x->value.shape(1) != 3 || x->value.shape(2) != cfg_.height ||
        x->value.shape(3) != cfg_.width)
        throw std::runtime_error("discriminator: wrong input shape");
    std::vector<ag::Var> logits;
    ag::Var cur = x;
    for (auto& sc : scales_) {
        auto h = ag::leaky_relu(sc.c1.forward(cur), 0.2);
        h = ag::leaky_relu(sc.n2.forward(sc.c2.forward(h)), 0.2);
        logits.push_back(sc.c3.forward(h));
        if (&sc != &scales_.back()) cur = ag::avg_pool2x(cur);
    }
    return logits;
}

void Discriminator::collect(std::vector<nn::ParamRef>& ps) {
    for (size_t s = 0; s < scales_.size(); ++s) {
        const std::string p = "disc.s" + std::to_string(s);
        scales_[s].c1.collect(p + ".c1", ps);
        scales_[s].c2.collect(p + ".c2", ps);
        scales_[s].n2.collect(p + ".n2", ps);
        scales_[s].c3.collect(p + ".c3", ps);
    }
}

}  // namespace gcl::gan
