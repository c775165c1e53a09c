#include "ravit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "kernels_common.hpp"

namespace ravit {
namespace kernels {

float exp_apx(float x) {
    x = std::min(x, kExpHiClamp);
    x = std::max(x, kExpLoClamp);

    float kf = std::nearbyintf(x * kLog2E);
    float r = x - kf * kLn2Hi;
    r = r - kf * kLn2Lo;

    float p = kExpC0;
    p = p * r + kExpC1;
    p = p * r + kExpC2;
    p = p * r + kExpC3;
    p = p * r + kExpC4;
    p = p * r + kExpC5;
    float y = p * (r * r) + r + 1.f;

    int32_t k = static_cast<int32_t>(kf);
    int32_t bits = (k + 127) << 23;
    float scale;
    std::memcpy(&scale, &bits, sizeof scale);
    return y * scale;
}

float erf_apx(float x) {
    float ax = std::fabs(x);
    float t = 1.f / (1.f + kErfP * ax);
    float poly = kErfA5;
    poly = poly * t + kErfA4;
    poly = poly * t + kErfA3;
    poly = poly * t + kErfA2;
    poly = poly * t + kErfA1;
    poly = poly * t;
    float e = exp_apx(-(ax * ax));
    float r = 1.f - poly * e;
    return std::signbit(x) ? -r : r;
}

namespace {

void dwconv_scalar(const float* src, int h, int w, int c,
                   const float* taps, const float* bias,
                   int kh, int kw, int stride, int pad_top, int pad_left,
                   float* dst, int oh, int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        int y0 = oy * stride - pad_top;
        int ky0 = std::max(0, -y0);
        int ky1 = std::min(kh, h - y0);
        for (int ox = 0; ox < ow; ++ox) {
            int x0 = ox * stride - pad_left;
            int kx0 = std::max(0, -x0);
            int kx1 = std::min(kw, w - x0);
            float* out = dst + (static_cast<size_t>(oy) * ow + ox) * c;
            for (int ch = 0; ch < c; ++ch) {
                float acc = bias[ch];
                for (int ky = ky0; ky < ky1; ++ky) {
                    const float* xrow =
                        src + ((static_cast<size_t>(y0 + ky)) * w + (x0 + kx0)) * c + ch;
                    const float* trow = taps + (static_cast<size_t>(ky) * kw + kx0) * c + ch;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        acc += xrow[0] * trow[0];
                        xrow += c;
                        trow += c;
                    }
                }
                out[ch] = acc;
            }
        }
    }
}

void matmul_scalar(const float* a, int m, int k,
                   const float* b, const float* bias,
                   float* dst, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = dst + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            float acc = bias ? bias[j] : 0.f;
            const float* bp = b + j;
            for (int kk = 0; kk < k; ++kk) {
                acc += arow[kk] * bp[0];
                bp += n;
            }
            crow[j] = acc;
        }
    }
}

void affine_ch_scalar(const float* x, size_t pixels, int c,
                      const float* scale, const float* shift, float* y) {
    for (size_t p = 0; p < pixels; ++p) {
        const float* xr = x + p * c;
        float* yr = y + p * c;
        for (int ch = 0; ch < c; ++ch)
            yr[ch] = xr[ch] * scale[ch] + shift[ch];
    }
}

void add_scalar(const float* a, const float* b, float* y, size_t count) {
    for (size_t i = 0; i < count; ++i)
        y[i] = a[i] + b[i];
}

void gelu_scalar(const float* x, float* y, size_t count) {
    for (size_t i = 0; i < count; ++i) {
        float v = x[i];
        float e = erf_apx(v * kInvSqrt2);
        float u = 1.f + e;
        float t = v * u;
        y[i] = 0.5f * t;
    }
}

} // namespace

const Backend& scalar_backend() {
    static const Backend k = {
        "scalar",
        dwconv_scalar,
        matmul_scalar,
        affine_ch_scalar,
        add_scalar,
        gelu_scalar,
    };
    return k;
}

} // namespace kernels
} // namespace ravit
