#pragma once

#include <stdexcept>
#include <vector>

#include "gcl/core/autograd.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/nn/layers.hpp"

namespace gcl::gan {

/// Network widths. Desk defaults keep every shape relation of the full-scale
/// design at 1/8 width; full scale stays constructible through config.
struct NetConfig {
    int height = 64;
    int width = 32;

    // identity encoder (stem + 3 residual stages + 1x1 head)
    int eid_stem = 8;
    int eid_c1 = 16;
    int eid_c2 = 32;
    int eid_c3 = 64;
    int fid_channels = 256;  // part-pooled identity feature channels
    int fid_bins = 4;
    int embed_dim = 64;  // contrast-side identity vector

    // structure encoder: /4 spatial, C_s channels
    int estr_channels = 16;

    // decoder
    int dec_channels = 16;
    int dec_blocks = 4;
    int dec_up1 = 8;
    int dec_up2 = 6;
    int style_hidden = 64;

    // discriminator
    int disc_base = 8;
    int disc_scales = 3;

    static NetConfig desk() { return NetConfig{}; }
    static NetConfig paper_scale() {
        NetConfig c;
        c.height = 256;
        c.width = 128;
        c.eid_stem = 64;
        c.eid_c1 = 128;
        c.eid_c2 = 256;
        c.eid_c3 = 512;
        c.fid_channels = 2048;
        c.embed_dim = 512;
        c.estr_channels = 128;
        c.dec_channels = 128;
        c.dec_up1 = 64;
        c.dec_up2 = 48;
        c.style_hidden = 256;
        c.disc_base = 64;
        return c;
    }
};

/// Residual block with batch norm (identity encoder).
class ResBlockBN {
public:
    ResBlockBN() = default;
    ResBlockBN(int in_c, int out_c, int stride, Rng& rng)
        : conv1_(in_c, out_c, 3, stride, 1, false, rng),
          bn1_(out_c),
          conv2_(out_c, out_c, 3, 1, 1, false, rng),
          bn2_(out_c),
          projected_(stride != 1 || in_c != out_c) {
        if (projected_) {
            skip_ = nn::Conv2d(in_c, out_c, 1, stride, 0, false, rng);
            skip_bn_ = nn::BatchNorm2d(out_c);
        }
    }
    ag::Var forward(const ag::Var& x, bool training) {
        auto h = ag::relu(bn1_.forward(conv1_.forward(x), training));
        h = bn2_.forward(conv2_.forward(h), training);
        auto s = projected_ ? skip_bn_.forward(skip_.forward(x), training) : x;
        return ag::relu(ag::add(h, s));
    }
    void collect(const std::string& p, std::vector<nn::ParamRef>& ps, std::vector<nn::BufferRef>& bs) {
        conv1_.collect(p + ".conv1", ps);
        bn1_.collect(p + ".bn1", ps, bs);
        conv2_.collect(p + ".conv2", ps);
        bn2_.collect(p + ".bn2", ps, bs);
        if (projected_) {
            skip_.collect(p + ".skip", ps);
            skip_bn_.collect(p + ".skip_bn", ps, bs);
        }
    }

private:
    nn::Conv2d conv1_, conv2_, skip_;
    nn::BatchNorm2d bn1_, bn2_, skip_bn_;
    bool projected_ = false;
};

/// Bottlenecked residual block with instance norm (structure encoder).
class ResBlockIN {
public:
    ResBlockIN() = default;
    ResBlockIN(int c, Rng& rng)
        : conv1_(c, c / 2, 3, 1, 1, false, rng),
          in1_(c / 2),
          conv2_(c / 2, c, 3, 1, 1, false, rng),
          in2_(c) {}
    ag::Var forward(const ag::Var& x) {
        auto h = ag::relu(in1_.forward(conv1_.forward(x)));
        h = in2_.forward(conv2_.forward(h));
        return ag::relu(ag::add(h, x));
    }
    void collect(const std::string& p, std::vector<nn::ParamRef>& ps) {
        conv1_.collect(p + ".conv1", ps);
        in1_.collect(p + ".in1", ps);
        conv2_.collect(p + ".conv2", ps);
        in2_.collect(p + ".in2", ps);
    }

private:
    nn::Conv2d conv1_, conv2_;
    nn::InstanceNorm2d in1_, in2_;
};

struct IdentityEncoding {
    ag::Var f_id;  // [N, fid_channels, fid_bins, 1]
    ag::Var f;     // [N, embed_dim], rows unit-norm
};

/// Shared identity encoder: conv backbone, part-average pooling for the
/// generation-side feature map, batchnorm neck + embedding for the
/// contrast-side vector.
class IdentityEncoder {
public:
    IdentityEncoder(const NetConfig& cfg, Rng& rng);
    IdentityEncoding forward(const ag::Var& x, bool training);
    void collect(std::vector<nn::ParamRef>& ps, std::vector<nn::BufferRef>& bs);
    int fid_flat_dim() const { return cfg_.fid_channels * cfg_.fid_bins; }

private:
    NetConfig cfg_;
    nn::Conv2d stem_;
    nn::BatchNorm2d stem_bn_;
    ResBlockBN r1_, r2_, r3_;
    nn::Conv2d head_;
    nn::BatchNorm2d head_bn_;
    nn::BatchNorm1d neck_;
    nn::Linear embed_;
};

/// Structure encoder: four stride/same convolutions then four residual
/// blocks; output spatial size is input / 4.
class StructureEncoder {
public:
    StructureEncoder(const NetConfig& cfg, Rng& rng);
    ag::Var forward(const ag::Var& s);
    void collect(std::vector<nn::ParamRef>& ps);

private:
    NetConfig cfg_;
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::InstanceNorm2d n1_, n2_, n3_, n4_;
    std::vector<ResBlockIN> blocks_;
};

/// Decoder: the identity feature map enters only through per-layer AdaIN
/// scale/bias pairs produced by a learned two-layer mapping; the structure
/// features carry all spatial content. Output squashed to [0,1].
class Decoder {
public:
    Decoder(const NetConfig& cfg, Rng& rng);
    ag::Var forward(const ag::Var& f_id, const ag::Var& f_str);
    void collect(std::vector<nn::ParamRef>& ps);

private:
    NetConfig cfg_;
    nn::Linear style1_, style2_;
    nn::Conv2d entry_;
    nn::InstanceNorm2d entry_in_;
    struct AdaBlock {
        nn::Conv2d conv1, conv2;
    };
    std::vector<AdaBlock> blocks_;
    nn::Conv2d up1_, up2_, out_;
    nn::InstanceNorm2d up1_in_, up2_in_;
};

/// Multi-scale patch discriminator; one logit map per scale, strictly
/// decreasing spatial size.
class Discriminator {
public:
    Discriminator(const NetConfig& cfg, Rng& rng);
    std::vector<ag::Var> forward(const ag::Var& x);
    void collect(std::vector<nn::ParamRef>& ps);

private:
    NetConfig cfg_;
    struct Scale {
        nn::Conv2d c1, c2, c3;
        nn::InstanceNorm2d n2;
    };
    std::vector<Scale> scales_;
};

}  // namespace gcl::gan
