#include "ravit/blocks.hpp"

#include <cmath>
#include <cstring>

#include "ravit/kernels.hpp"
#include "ravit/ops.hpp"

namespace ravit {

Tensor4 dw_site_forward(const Tensor4& x, const DwSite& site) {
    return site.fused ? fused_dw_forward(x, site.conv)
                      : repmsdw_forward(x, site.set);
}

static Mat as_tokens(const Tensor4& x, int batch) {
    Mat m(x.h * x.w, x.c);
    const float* src = x.data.data() + static_cast<size_t>(batch) * x.h * x.w * x.c;
    std::memcpy(m.data.data(), src, m.data.size() * sizeof(float));
    return m;
}

Tensor4 ffn_forward(const Tensor4& x, const FfnParams& ffn) {
    if (ffn.w_expand.rows != x.c)
        throw std::invalid_argument("ffn_forward: expand rows != channels");
    if (ffn.w_reduce.rows != ffn.w_expand.cols || ffn.w_reduce.cols != x.c)
        throw std::invalid_argument("ffn_forward: reduce shape mismatch");
    Mat tokens(static_cast<int>(x.pixels()), x.c);
    tokens.data = x.data;
    Mat hidden = mat_mul(tokens, ffn.w_expand, ffn.b_expand);
    kernels::active().gelu(hidden.data.data(), hidden.data.data(), hidden.data.size());
    Mat out = mat_mul(hidden, ffn.w_reduce, ffn.b_reduce);
    Tensor4 y(x.n, x.h, x.w, x.c);
    y.data = std::move(out.data);
    return y;
}

Tensor4 repsa_forward(const Tensor4& x, const BlockParams& block) {
    const SaParams& sa = block.sa;
    Tensor4 u = dw_site_forward(x, block.dw);
    if (sa.wq.rows != u.c || sa.wk.rows != u.c || sa.wv.rows != u.c)
        throw std::invalid_argument("repsa_forward: projection rows != channels");
    if (sa.wq.cols != sa.wk.cols)
        throw std::invalid_argument("repsa_forward: query/key width mismatch");
    if (sa.wo.rows != u.c + sa.wv.cols || sa.wo.cols != u.c)
        throw std::invalid_argument("repsa_forward: output projection shape mismatch");

    const int hw = u.h * u.w;
    const int dv = sa.wv.cols;
    const float scale = 1.f / std::sqrt(static_cast<float>(sa.wq.cols));
    Tensor4 out(u.n, u.h, u.w, u.c);
    for (int b = 0; b < u.n; ++b) {
        Mat tokens = as_tokens(u, b);
        Mat q = mat_mul(tokens, sa.wq, {});
        Mat k = mat_mul(tokens, sa.wk, {});
        Mat v = mat_mul(tokens, sa.wv, {});
        Mat scores = mat_mul(q, transpose(k), {});
        for (float& s : scores.data)
            s *= scale;
        Mat attn = mat_mul(softmax_rows(scores), v, {});
        Mat cat(hw, u.c + dv);
        for (int t = 0; t < hw; ++t) {
            std::memcpy(cat.row(t), tokens.row(t), static_cast<size_t>(u.c) * sizeof(float));
            std::memcpy(cat.row(t) + u.c, attn.row(t), static_cast<size_t>(dv) * sizeof(float));
        }
        Mat proj = mat_mul(cat, sa.wo, {});
        std::memcpy(out.data.data() + static_cast<size_t>(b) * hw * u.c,
                    proj.data.data(), proj.data.size() * sizeof(float));
    }
    return out;
}

Tensor4 ravit_block(const Tensor4& x, const BlockParams& block) {
    Tensor4 mixed;
    if (block.mixer == MixerKind::RepMSDW) {
        // the conv unit ends in its own BN, which is the mixer norm
        mixed = dw_site_forward(x, block.dw);
    } else {
        mixed = repsa_forward(x, block);
        batch_norm_inplace(mixed, block.sa_norm);
    }
    add_inplace(mixed, x);
    Tensor4 f = ffn_forward(mixed, block.ffn);
    batch_norm_inplace(f, block.ffn_norm);
    add_inplace(f, mixed);
    return f;
}

Tensor4 conv_full_forward(const Tensor4& x, const ConvFull& conv, Padding pad) {
    if (conv.cin != x.c)
        throw std::invalid_argument("conv_full_forward: input channel mismatch");
    if (conv.weight.rows != conv.kh * conv.kw * conv.cin || conv.weight.cols != conv.cout)
        throw std::invalid_argument("conv_full_forward: weight shape mismatch");
    if (!conv.bias.empty() && static_cast<int>(conv.bias.size()) != conv.cout)
        throw std::invalid_argument("conv_full_forward: bias length mismatch");
    if (conv.stride <= 0)
        throw std::invalid_argument("conv_full_forward: stride must be positive");

    const int oh = conv_out_extent(x.h, conv.kh, pad.top, pad.bottom, conv.stride);
    const int ow = conv_out_extent(x.w, conv.kw, pad.left, pad.right, conv.stride);
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv_full_forward: kernel larger than padded input");
    const int patch = conv.kh * conv.kw * conv.cin;
    Tensor4 out(x.n, oh, ow, conv.cout);
    Mat patches(oh * ow, patch);
    for (int b = 0; b < x.n; ++b) {
        std::fill(patches.data.begin(), patches.data.end(), 0.f);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float* row = patches.row(oy * ow + ox);
                for (int ky = 0; ky < conv.kh; ++ky) {
                    const int iy = oy * conv.stride - pad.top + ky;
                    if (iy < 0 || iy >= x.h)
                        continue;
                    for (int kx = 0; kx < conv.kw; ++kx) {
                        const int ix = ox * conv.stride - pad.left + kx;
                        if (ix < 0 || ix >= x.w)
                            continue;
                        std::memcpy(row + (ky * conv.kw + kx) * conv.cin,
                                    &x.data[x.index(b, iy, ix, 0)],
                                    static_cast<size_t>(conv.cin) * sizeof(float));
                    }
                }
            }
        }
        Mat res = mat_mul(patches, conv.weight, conv.bias);
        std::memcpy(out.data.data() + static_cast<size_t>(b) * oh * ow * conv.cout,
                    res.data.data(), res.data.size() * sizeof(float));
    }
    return out;
}

Tensor4 stem_forward(const Tensor4& x, const std::vector<StemLayer>& stem) {
    Tensor4 y = x;
    for (const StemLayer& layer : stem) {
        y = conv_full_forward(y, layer.conv, same_pad(layer.conv.kh, layer.conv.kw));
        batch_norm_inplace(y, layer.bn);
        gelu_inplace(y);
    }
    return y;
}

Tensor4 downsample_forward(const Tensor4& x, const DownsampleParams& ds) {
    Tensor4 y = dw_site_forward(x, ds.dw);
    y = conv_pw(y, ds.pw, {});
    batch_norm_inplace(y, ds.bn);
    gelu_inplace(y);
    Tensor4 f = ffn_forward(y, ds.ffn);
    batch_norm_inplace(f, ds.ffn_norm);
    add_inplace(f, y);
    return f;
}

Mat classifier_forward(const Tensor4& x, const HeadParams& head) {
    if (head.fc1.rows != x.c)
        throw std::invalid_argument("classifier_forward: fc1 rows != channels");
    if (head.fc2.rows != head.fc1.cols)
        throw std::invalid_argument("classifier_forward: fc2 rows != fc1 cols");
    Mat pooled = global_avg_pool(x);
    Mat hidden = mat_mul(pooled, head.fc1, head.b1);
    kernels::active().gelu(hidden.data.data(), hidden.data.data(), hidden.data.size());
    return mat_mul(hidden, head.fc2, head.b2);
}

} // namespace ravit
