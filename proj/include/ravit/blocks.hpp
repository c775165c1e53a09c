#pragma once

#include <stdexcept>
#include <vector>

#include "ravit/reparam.hpp"

namespace ravit {

// Depthwise site that is either in training form or collapsed to a
// single conv by fuse().
struct DwSite {
    bool fused = false;
    DwKernelSet set;
    FusedDwConv conv;

    static DwSite make(int k, int channels, int stride) {
        DwSite site;
        site.set = DwKernelSet::make(k, channels, stride);
        return site;
    }
    int channels() const { return fused ? conv.channels : set.channels; }
    int kernel() const { return fused ? conv.k : set.k; }
    void fuse() {
        if (fused)
            throw std::runtime_error("DwSite: already fused");
        conv = fuse_repmsdw(set);
        set = DwKernelSet{};
        fused = true;
    }
};

Tensor4 dw_site_forward(const Tensor4& x, const DwSite& site);

struct FfnParams {
    Mat w_expand;                // C x rC
    std::vector<float> b_expand; // rC
    Mat w_reduce;                // rC x C
    std::vector<float> b_reduce; // C
};

// Per-pixel expand / gelu / reduce.
Tensor4 ffn_forward(const Tensor4& x, const FfnParams& ffn);

struct SaParams {
    int dq = 16, dk = 16, dv = 0;
    Mat wq; // C x dq
    Mat wk; // C x dk
    Mat wv; // C x dv
    Mat wo; // (C + dv) x C
};

inline int attention_value_dim(int channels) {
    return static_cast<int>(0.215 * channels);
}

enum class MixerKind { RepMSDW, RepSA };

struct BlockParams {
    MixerKind mixer = MixerKind::RepMSDW;
    DwSite dw;        // the token-mixing conv unit; also the U path for RepSA
    SaParams sa;      // RepSA only
    BnParams sa_norm; // RepSA only, post-mixer norm
    FfnParams ffn;
    BnParams ffn_norm;
};

// Token mixer with single-head attention over the conv-refined map:
// U = dw(x); per-pixel Q,K,V projections; softmax(Q K^T / sqrt(dq)) V;
// output projection over concat(U, attention).
Tensor4 repsa_forward(const Tensor4& x, const BlockParams& block);

// Residual pair: x + Norm(mixer(x)), then + Norm(ffn(...)). For the
// plain conv mixer the unit's own trailing BN is the Norm.
Tensor4 ravit_block(const Tensor4& x, const BlockParams& block);

// Dense conv, weight stored (kh*kw*cin) x cout; bias may be empty.
struct ConvFull {
    int kh = 0, kw = 0, cin = 0, cout = 0, stride = 1;
    Mat weight;
    std::vector<float> bias;
};

Tensor4 conv_full_forward(const Tensor4& x, const ConvFull& conv, Padding pad);

struct StemLayer {
    ConvFull conv;
    BnParams bn;
};

// Sequence of stride-2 3x3 convs, each followed by BN and GELU.
Tensor4 stem_forward(const Tensor4& x, const std::vector<StemLayer>& stem);

struct DownsampleParams {
    DwSite dw;     // k=7, stride 2, input width
    Mat pw;        // Cout x Cin
    BnParams bn;   // Cout
    FfnParams ffn; // at Cout
    BnParams ffn_norm;
};

// Halve resolution and expand width: dw stride 2, pointwise expansion,
// BN + GELU, then a residual FFN sub-block.
Tensor4 downsample_forward(const Tensor4& x, const DownsampleParams& ds);

struct HeadParams {
    Mat fc1; // C x hidden
    std::vector<float> b1;
    Mat fc2; // hidden x classes
    std::vector<float> b2;
};

// Global average pool, hidden FC + GELU, classifier FC.
Mat classifier_forward(const Tensor4& x, const HeadParams& head);

} // namespace ravit
