#include "ravit/reparam.hpp"

#include <cmath>

#include "ravit/ops.hpp"
#include "ravit/rng.hpp"

namespace ravit {

int DwKernelSet::small_kernel(int k) {
    int s = k / 2;
    if (s % 2 == 0) s -= 1;
    return s < 1 ? 1 : s;
}

DwKernelSet DwKernelSet::make(int k, int channels, int stride) {
    if (k < 3 || k % 2 == 0)
        throw std::invalid_argument("DwKernelSet: kernel extent must be odd and >= 3");
    if (channels <= 0 || channels % 4 != 0)
        throw std::invalid_argument("DwKernelSet: channels must be divisible by 4");
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("DwKernelSet: stride must be 1 or 2");
    DwKernelSet set;
    set.k = k;
    set.s = small_kernel(k);
    set.channels = channels;
    set.stride = stride;
    int quarter = channels / 4;
    set.main = DwWeights(k, k, channels);
    set.branch1 = DwWeights(set.s, set.s, quarter);
    set.branch2a = DwWeights(1, k, quarter);
    set.branch2b = DwWeights(k, 1, quarter);
    set.branch3a = DwWeights(3, k, quarter);
    set.branch3b = DwWeights(k, 3, quarter);
    set.bn = BnParams(channels);
    return set;
}

void DwKernelSet::validate() const {
    if (k < 3 || k % 2 == 0)
        throw std::invalid_argument("DwKernelSet: kernel extent must be odd and >= 3");
    if (channels <= 0 || channels % 4 != 0)
        throw std::invalid_argument("DwKernelSet: channels must be divisible by 4");
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("DwKernelSet: stride must be 1 or 2");
    if (s != small_kernel(k))
        throw std::invalid_argument("DwKernelSet: small kernel extent inconsistent with k");
    int quarter = channels / 4;
    auto check = [](const DwWeights& wts, int kh, int kw, int ch, const char* name) {
        if (wts.kh != kh || wts.kw != kw || wts.channels != ch)
            throw std::invalid_argument(std::string("DwKernelSet: missing or misshaped ") + name);
    };
    check(main, k, k, channels, "main");
    check(branch1, s, s, quarter, "branch1");
    check(branch2a, 1, k, quarter, "branch2a");
    check(branch2b, k, 1, quarter, "branch2b");
    check(branch3a, 3, k, quarter, "branch3a");
    check(branch3b, k, 3, quarter, "branch3b");
    if (bn.channels() != channels)
        throw std::invalid_argument("DwKernelSet: batch norm channels mismatch");
    bn.validate();
}

Mat embed_kernel(const Mat& small, int k) {
    if (small.rows > k || small.cols > k)
        throw std::invalid_argument("embed_kernel: kernel larger than target");
    if (small.rows % 2 == 0 || small.cols % 2 == 0 || k % 2 == 0)
        throw std::invalid_argument("embed_kernel: extents must be odd");
    Mat out(k, k);
    int oy = (k - small.rows) / 2;
    int ox = (k - small.cols) / 2;
    for (int r = 0; r < small.rows; ++r)
        for (int c = 0; c < small.cols; ++c)
            out.at(oy + r, ox + c) = small.at(r, c);
    return out;
}

Mat identity_kernel(int k, float value) {
    if (k <= 0 || k % 2 == 0)
        throw std::invalid_argument("identity_kernel: extent must be odd");
    Mat out(k, k);
    out.at(k / 2, k / 2) = value;
    return out;
}

std::pair<DwWeights, std::vector<float>> fold_bn(const DwWeights& kernels,
                                                 const std::vector<float>& bias,
                                                 const BnParams& bn) {
    if (bn.channels() != kernels.channels)
        throw std::invalid_argument("fold_bn: channel count mismatch");
    if (static_cast<int>(bias.size()) != kernels.channels)
        throw std::invalid_argument("fold_bn: bias length mismatch");
    bn.validate();

    DwWeights out_k(kernels.kh, kernels.kw, kernels.channels);
    std::vector<float> out_b(kernels.channels);
    for (int ch = 0; ch < kernels.channels; ++ch) {
        double scale = static_cast<double>(bn.gamma[ch]) /
                       std::sqrt(static_cast<double>(bn.var[ch]) + bn.eps);
        for (int ky = 0; ky < kernels.kh; ++ky)
            for (int kx = 0; kx < kernels.kw; ++kx)
                out_k.at(ch, ky, kx) =
                    static_cast<float>(kernels.at(ch, ky, kx) * scale);
        out_b[ch] = static_cast<float>(
            bn.beta[ch] + (static_cast<double>(bias[ch]) - bn.mean[ch]) * scale);
    }
    return {std::move(out_k), std::move(out_b)};
}

FusedDwConv fuse_repmsdw(const DwKernelSet& set) {
    set.validate();
    int k = set.k;
    int quarter = set.channels / 4;

    FusedDwConv out;
    out.k = k;
    out.channels = set.channels;
    out.stride = set.stride;
    out.kernels = DwWeights(k, k, set.channels);
    out.bias.assign(set.channels, 0.f);

    std::vector<double> acc(static_cast<size_t>(k) * k);
    for (int ch = 0; ch < set.channels; ++ch) {
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                acc[static_cast<size_t>(ky) * k + kx] = set.main.at(ch, ky, kx);

        int group = ch / quarter;
        int gc = ch - group * quarter;
        auto add_embedded = [&](const DwWeights& wts) {
            int oy = (k - wts.kh) / 2;
            int ox = (k - wts.kw) / 2;
            for (int ky = 0; ky < wts.kh; ++ky)
                for (int kx = 0; kx < wts.kw; ++kx)
                    acc[static_cast<size_t>(oy + ky) * k + (ox + kx)] += wts.at(gc, ky, kx);
        };
        switch (group) {
            case 0: add_embedded(set.branch1); break;
            case 1: add_embedded(set.branch2a); add_embedded(set.branch2b); break;
            case 2: add_embedded(set.branch3a); add_embedded(set.branch3b); break;
            default: acc[static_cast<size_t>(k / 2) * k + k / 2] += 1.0; break;
        }

        double scale = static_cast<double>(set.bn.gamma[ch]) /
                       std::sqrt(static_cast<double>(set.bn.var[ch]) + set.bn.eps);
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                out.kernels.at(ch, ky, kx) =
                    static_cast<float>(acc[static_cast<size_t>(ky) * k + kx] * scale);
        out.bias[ch] = static_cast<float>(
            set.bn.beta[ch] - static_cast<double>(set.bn.mean[ch]) * scale);
    }
    return out;
}

namespace {

Tensor4 subsample2(const Tensor4& x) {
    int oh = (x.h - 1) / 2 + 1;
    int ow = (x.w - 1) / 2 + 1;
    Tensor4 out(x.n, oh, ow, x.c);
    for (int in = 0; in < x.n; ++in)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const float* src = &x.data[x.index(in, oy * 2, ox * 2, 0)];
                float* dst = &out.data[out.index(in, oy, ox, 0)];
                for (int ch = 0; ch < x.c; ++ch) dst[ch] = src[ch];
            }
    return out;
}

} // namespace

Tensor4 repmsdw_forward(const Tensor4& x, const DwKernelSet& set) {
    set.validate();
    if (x.c != set.channels)
        throw std::invalid_argument("repmsdw_forward: channel mismatch");
    int quarter = set.channels / 4;
    std::vector<float> zero4(quarter, 0.f);
    std::vector<float> zero(set.channels, 0.f);
    int stride = set.stride;

    auto chunks = chunk_channels(x, 4);
    Tensor4 y1 = conv_dw(chunks[0], set.branch1, zero4, stride, same_pad(set.s, set.s));
    Tensor4 y2 = add(conv_dw(chunks[1], set.branch2a, zero4, stride, same_pad(1, set.k)),
                     conv_dw(chunks[1], set.branch2b, zero4, stride, same_pad(set.k, 1)));
    Tensor4 y3 = add(conv_dw(chunks[2], set.branch3a, zero4, stride, same_pad(3, set.k)),
                     conv_dw(chunks[2], set.branch3b, zero4, stride, same_pad(set.k, 3)));
    Tensor4 y4 = stride == 2 ? subsample2(chunks[3]) : chunks[3];

    Tensor4 merged = concat_channels({y1, y2, y3, y4});
    Tensor4 main_out = conv_dw(x, set.main, zero, stride, same_pad(set.k, set.k));
    add_inplace(main_out, merged);
    batch_norm_inplace(main_out, set.bn);
    return main_out;
}

Tensor4 fused_dw_forward(const Tensor4& x, const FusedDwConv& conv) {
    if (x.c != conv.channels)
        throw std::invalid_argument("fused_dw_forward: channel mismatch");
    return conv_dw(x, conv.kernels, conv.bias, conv.stride, same_pad(conv.k, conv.k));
}

EquivalenceReport verify_equivalence(const DwKernelSet& set, int trials,
                                     double tolerance, uint64_t seed) {
    if (trials <= 0)
        throw std::invalid_argument("verify_equivalence: trials must be positive");
    FusedDwConv fused = fuse_repmsdw(set);
    Rng rng(seed);

    EquivalenceReport report;
    report.trials = trials;
    report.tolerance = tolerance;
    for (int t = 0; t < trials; ++t) {
        Tensor4 x(1, 12, 12, set.channels);
        for (auto& v : x.data) v = rng.normal(0.f, 1.f);
        Tensor4 a = repmsdw_forward(x, set);
        Tensor4 b = fused_dw_forward(x, fused);
        for (size_t i = 0; i < a.data.size(); ++i) {
            double d = std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
            if (d > report.max_abs_diff) report.max_abs_diff = d;
        }
    }
    report.pass = report.max_abs_diff <= tolerance;
    return report;
}

} // namespace ravit
