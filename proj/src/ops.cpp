#include "ravit/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ravit/kernels.hpp"

namespace ravit {

void BnParams::validate() const {
    size_t n = gamma.size();
    if (beta.size() != n || mean.size() != n || var.size() != n)
        throw std::invalid_argument("BnParams: per-channel arrays disagree in length");
    if (eps <= 0.f)
        throw std::invalid_argument("BnParams: eps must be positive");
    for (float v : var)
        if (v <= 0.f)
            throw std::invalid_argument("BnParams: variance must be positive");
}

Tensor4 conv_dw(const Tensor4& x, const DwWeights& kernels,
                const std::vector<float>& bias, int stride, Padding pad) {
    if (kernels.channels != x.c)
        throw std::invalid_argument("conv_dw: kernel count " +
                                    std::to_string(kernels.channels) +
                                    " does not match input channels " +
                                    std::to_string(x.c));
    if (static_cast<int>(bias.size()) != x.c)
        throw std::invalid_argument("conv_dw: bias length does not match channels");
    if (stride <= 0)
        throw std::invalid_argument("conv_dw: stride must be positive");
    int oh = conv_out_extent(x.h, kernels.kh, pad.top, pad.bottom, stride);
    int ow = conv_out_extent(x.w, kernels.kw, pad.left, pad.right, stride);
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv_dw: kernel larger than padded input");

    // repack channel-major grids to tap-major for the channels-inner kernel
    std::vector<float> taps(static_cast<size_t>(kernels.kh) * kernels.kw * x.c);
    for (int ky = 0; ky < kernels.kh; ++ky)
        for (int kx = 0; kx < kernels.kw; ++kx)
            for (int ch = 0; ch < x.c; ++ch)
                taps[(static_cast<size_t>(ky) * kernels.kw + kx) * x.c + ch] =
                    kernels.at(ch, ky, kx);

    Tensor4 out(x.n, oh, ow, x.c);
    const auto& k = kernels::active();
    size_t in_plane = static_cast<size_t>(x.h) * x.w * x.c;
    size_t out_plane = static_cast<size_t>(oh) * ow * x.c;
    for (int in = 0; in < x.n; ++in)
        k.dwconv(x.data.data() + in * in_plane, x.h, x.w, x.c,
                 taps.data(), bias.data(), kernels.kh, kernels.kw,
                 stride, pad.top, pad.left,
                 out.data.data() + in * out_plane, oh, ow);
    return out;
}

Tensor4 conv_pw(const Tensor4& x, const Mat& weight, const std::vector<float>& bias) {
    if (weight.cols != x.c)
        throw std::invalid_argument("conv_pw: weight expects " +
                                    std::to_string(weight.cols) +
                                    " input channels, tensor has " +
                                    std::to_string(x.c));
    if (!bias.empty() && static_cast<int>(bias.size()) != weight.rows)
        throw std::invalid_argument("conv_pw: bias length does not match output channels");

    Mat wt = transpose(weight); // Cin x Cout for the K x N kernel
    Tensor4 out(x.n, x.h, x.w, weight.rows);
    kernels::active().matmul(x.data.data(), static_cast<int>(x.pixels()), x.c,
                             wt.data.data(), bias.empty() ? nullptr : bias.data(),
                             out.data.data(), weight.rows);
    return out;
}

namespace {

void bn_scale_shift(const BnParams& bn, std::vector<float>& scale,
                    std::vector<float>& shift) {
    int c = bn.channels();
    scale.resize(c);
    shift.resize(c);
    // double here keeps the coefficients bit-identical to the fused fold
    for (int ch = 0; ch < c; ++ch) {
        double s = static_cast<double>(bn.gamma[ch]) /
                   std::sqrt(static_cast<double>(bn.var[ch]) + bn.eps);
        scale[ch] = static_cast<float>(s);
        shift[ch] = static_cast<float>(bn.beta[ch] - bn.mean[ch] * s);
    }
}

} // namespace

void batch_norm_inplace(Tensor4& x, const BnParams& bn) {
    if (bn.channels() != x.c)
        throw std::invalid_argument("batch_norm: parameter channels " +
                                    std::to_string(bn.channels()) +
                                    " do not match tensor channels " +
                                    std::to_string(x.c));
    bn.validate();
    std::vector<float> scale, shift;
    bn_scale_shift(bn, scale, shift);
    kernels::active().affine_ch(x.data.data(), x.pixels(), x.c,
                                scale.data(), shift.data(), x.data.data());
}

Tensor4 batch_norm(const Tensor4& x, const BnParams& bn) {
    Tensor4 out = x;
    batch_norm_inplace(out, bn);
    return out;
}

void gelu_inplace(Tensor4& x) {
    kernels::active().gelu(x.data.data(), x.data.data(), x.size());
}

Tensor4 gelu(const Tensor4& x) {
    Tensor4 out = x;
    gelu_inplace(out);
    return out;
}

Mat softmax_rows(const Mat& m) {
    if (m.cols <= 0)
        throw std::invalid_argument("softmax_rows: empty rows");
    Mat out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
        const float* src = m.row(r);
        float* dst = out.row(r);
        float mx = src[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, src[j]);
        float sum = 0.f;
        for (int j = 0; j < m.cols; ++j) {
            float e = kernels::exp_apx(src[j] - mx);
            dst[j] = e;
            sum += e;
        }
        float inv = 1.f / sum;
        for (int j = 0; j < m.cols; ++j) dst[j] *= inv;
    }
    return out;
}

Mat global_avg_pool(const Tensor4& x) {
    Mat out(x.n, x.c);
    size_t hw = static_cast<size_t>(x.h) * x.w;
    for (int in = 0; in < x.n; ++in) {
        std::vector<double> acc(x.c, 0.0);
        const float* base = x.data.data() + in * hw * x.c;
        for (size_t p = 0; p < hw; ++p)
            for (int ch = 0; ch < x.c; ++ch)
                acc[ch] += base[p * x.c + ch];
        for (int ch = 0; ch < x.c; ++ch)
            out.at(in, ch) = static_cast<float>(acc[ch] / static_cast<double>(hw));
    }
    return out;
}

Tensor4 upsample_nearest2x(const Tensor4& x) {
    Tensor4 out(x.n, x.h * 2, x.w * 2, x.c);
    for (int in = 0; in < x.n; ++in)
        for (int iy = 0; iy < x.h; ++iy)
            for (int ix = 0; ix < x.w; ++ix) {
                const float* src = &x.data[x.index(in, iy, ix, 0)];
                for (int dy = 0; dy < 2; ++dy) {
                    float* dst = &out.data[out.index(in, iy * 2 + dy, ix * 2, 0)];
                    std::copy(src, src + x.c, dst);
                    std::copy(src, src + x.c, dst + x.c);
                }
            }
    return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    Tensor4 out(a.n, a.h, a.w, a.c);
    kernels::active().add(a.data.data(), b.data.data(), out.data.data(), a.size());
    return out;
}

void add_inplace(Tensor4& acc, const Tensor4& x) {
    if (!acc.same_shape(x))
        throw std::invalid_argument("add: shape mismatch " + acc.shape_str() +
                                    " vs " + x.shape_str());
    kernels::active().add(acc.data.data(), x.data.data(), acc.data.data(), acc.size());
}

Tensor4 concat_channels(const std::vector<Tensor4>& parts) {
    if (parts.empty())
        throw std::invalid_argument("concat_channels: no inputs");
    int total_c = 0;
    for (const auto& p : parts) {
        if (p.n != parts[0].n || p.h != parts[0].h || p.w != parts[0].w)
            throw std::invalid_argument("concat_channels: spatial/batch mismatch");
        total_c += p.c;
    }
    Tensor4 out(parts[0].n, parts[0].h, parts[0].w, total_c);
    size_t pixels = parts[0].pixels();
    for (size_t px = 0; px < pixels; ++px) {
        float* dst = out.data.data() + px * total_c;
        for (const auto& p : parts) {
            const float* src = p.data.data() + px * p.c;
            std::copy(src, src + p.c, dst);
            dst += p.c;
        }
    }
    return out;
}

std::vector<Tensor4> chunk_channels(const Tensor4& x, int parts) {
    if (parts <= 0 || x.c % parts != 0)
        throw std::invalid_argument("chunk_channels: channels " + std::to_string(x.c) +
                                    " not divisible into " + std::to_string(parts) +
                                    " parts");
    int cc = x.c / parts;
    std::vector<Tensor4> out;
    out.reserve(parts);
    for (int p = 0; p < parts; ++p)
        out.emplace_back(x.n, x.h, x.w, cc);
    size_t pixels = x.pixels();
    for (size_t px = 0; px < pixels; ++px) {
        const float* src = x.data.data() + px * x.c;
        for (int p = 0; p < parts; ++p)
            std::copy(src + p * cc, src + (p + 1) * cc,
                      out[p].data.data() + px * cc);
    }
    return out;
}

Mat mat_mul(const Mat& a, const Mat& b_kn, const std::vector<float>& bias) {
    if (a.cols != b_kn.rows)
        throw std::invalid_argument("mat_mul: inner extents disagree");
    if (!bias.empty() && static_cast<int>(bias.size()) != b_kn.cols)
        throw std::invalid_argument("mat_mul: bias length does not match columns");
    Mat out(a.rows, b_kn.cols);
    kernels::active().matmul(a.data.data(), a.rows, a.cols, b_kn.data.data(),
                             bias.empty() ? nullptr : bias.data(),
                             out.data.data(), b_kn.cols);
    return out;
}

Mat transpose(const Mat& m) {
    Mat out(m.cols, m.rows);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            out.at(c, r) = m.at(r, c);
    return out;
}

} // namespace ravit
