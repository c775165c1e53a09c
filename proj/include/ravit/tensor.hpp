#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ravit {

// 4-d activation tensor, NHWC, channels innermost, contiguous float32.
struct Tensor4 {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<float> data;

    Tensor4() = default;
    Tensor4(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_) {
        if (n_ <= 0 || h_ <= 0 || w_ <= 0 || c_ <= 0)
            throw std::invalid_argument("Tensor4: extents must be positive");
        data.assign(static_cast<size_t>(n_) * h_ * w_ * c_, 0.f);
    }

    size_t size() const { return data.size(); }
    size_t pixels() const { return static_cast<size_t>(n) * h * w; }

    size_t index(int in, int iy, int ix, int ic) const {
        return ((static_cast<size_t>(in) * h + iy) * w + ix) * c + ic;
    }
    float& at(int in, int iy, int ix, int ic) { return data[index(in, iy, ix, ic)]; }
    float at(int in, int iy, int ix, int ic) const { return data[index(in, iy, ix, ic)]; }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }
    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(h) + "x" +
               std::to_string(w) + "x" + std::to_string(c);
    }
};

// Row-major 2-d float matrix.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<float> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c) {
        if (r <= 0 || c <= 0)
            throw std::invalid_argument("Mat: extents must be positive");
        data.assign(static_cast<size_t>(r) * c, 0.f);
    }

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
};

// Batch norm inference parameters, one entry per channel.
struct BnParams {
    std::vector<float> gamma, beta, mean, var;
    float eps = 1e-5f;

    BnParams() = default;
    explicit BnParams(int channels)
        : gamma(channels, 1.f), beta(channels, 0.f),
          mean(channels, 0.f), var(channels, 1.f) {}

    int channels() const { return static_cast<int>(gamma.size()); }
    void validate() const;
};

// Per-channel square-grid depthwise kernels, channel-major storage.
struct DwWeights {
    int kh = 0, kw = 0, channels = 0;
    std::vector<float> data; // [channel][ky][kx]

    DwWeights() = default;
    DwWeights(int kh_, int kw_, int channels_)
        : kh(kh_), kw(kw_), channels(channels_) {
        if (kh_ <= 0 || kw_ <= 0 || channels_ <= 0)
            throw std::invalid_argument("DwWeights: extents must be positive");
        data.assign(static_cast<size_t>(kh_) * kw_ * channels_, 0.f);
    }

    float& at(int ch, int ky, int kx) {
        return data[(static_cast<size_t>(ch) * kh + ky) * kw + kx];
    }
    float at(int ch, int ky, int kx) const {
        return data[(static_cast<size_t>(ch) * kh + ky) * kw + kx];
    }
};

struct Padding {
    int top = 0, left = 0, bottom = 0, right = 0;
};

inline Padding same_pad(int kh, int kw) {
    return Padding{(kh - 1) / 2, (kw - 1) / 2, kh / 2, kw / 2};
}

inline int conv_out_extent(int in, int k, int pad_lo, int pad_hi, int stride) {
    int padded = in + pad_lo + pad_hi;
    if (padded < k) return 0;
    return (padded - k) / stride + 1;
}

} // namespace ravit
