#include "ravit/kernels.hpp"

#if defined(__aarch64__) || defined(__ARM_NEON)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kernels_common.hpp"

namespace ravit {
namespace kernels {
namespace {

// 4-lane transliterations of the scalar exp/erf lanes; same operation
// sequence, mul+add only, so results match the scalar lane bitwise.
inline float32x4_t exp_q(float32x4_t x) {
    x = vminq_f32(x, vdupq_n_f32(kExpHiClamp));
    x = vmaxq_f32(x, vdupq_n_f32(kExpLoClamp));

    float32x4_t kf = vrndnq_f32(vmulq_f32(x, vdupq_n_f32(kLog2E)));
    float32x4_t r = vsubq_f32(x, vmulq_f32(kf, vdupq_n_f32(kLn2Hi)));
    r = vsubq_f32(r, vmulq_f32(kf, vdupq_n_f32(kLn2Lo)));

    float32x4_t p = vdupq_n_f32(kExpC0);
    p = vaddq_f32(vmulq_f32(p, r), vdupq_n_f32(kExpC1));
    p = vaddq_f32(vmulq_f32(p, r), vdupq_n_f32(kExpC2));
    p = vaddq_f32(vmulq_f32(p, r), vdupq_n_f32(kExpC3));
    p = vaddq_f32(vmulq_f32(p, r), vdupq_n_f32(kExpC4));
    p = vaddq_f32(vmulq_f32(p, r), vdupq_n_f32(kExpC5));
    float32x4_t y = vaddq_f32(
        vaddq_f32(vmulq_f32(p, vmulq_f32(r, r)), r), vdupq_n_f32(1.f));

    int32x4_t k = vcvtnq_s32_f32(kf);
    int32x4_t bits = vshlq_n_s32(vaddq_s32(k, vdupq_n_s32(127)), 23);
    return vmulq_f32(y, vreinterpretq_f32_s32(bits));
}

inline float32x4_t erf_q(float32x4_t x) {
    uint32x4_t sign = vandq_u32(vreinterpretq_u32_f32(x), vdupq_n_u32(0x80000000u));
    float32x4_t ax = vabsq_f32(x);

    float32x4_t t = vdivq_f32(
        vdupq_n_f32(1.f),
        vaddq_f32(vdupq_n_f32(1.f), vmulq_f32(vdupq_n_f32(kErfP), ax)));
    float32x4_t poly = vdupq_n_f32(kErfA5);
    poly = vaddq_f32(vmulq_f32(poly, t), vdupq_n_f32(kErfA4));
    poly = vaddq_f32(vmulq_f32(poly, t), vdupq_n_f32(kErfA3));
    poly = vaddq_f32(vmulq_f32(poly, t), vdupq_n_f32(kErfA2));
    poly = vaddq_f32(vmulq_f32(poly, t), vdupq_n_f32(kErfA1));
    poly = vmulq_f32(poly, t);

    float32x4_t e = exp_q(vnegq_f32(vmulq_f32(ax, ax)));
    float32x4_t r = vsubq_f32(vdupq_n_f32(1.f), vmulq_f32(poly, e));
    return vreinterpretq_f32_u32(vorrq_u32(vreinterpretq_u32_f32(r), sign));
}

void gelu_neon(const float* x, float* y, size_t count) {
    size_t i = 0;
    for (; i + 4 <= count; i += 4) {
        float32x4_t v = vld1q_f32(x + i);
        float32x4_t e = erf_q(vmulq_f32(v, vdupq_n_f32(kInvSqrt2)));
        float32x4_t u = vaddq_f32(vdupq_n_f32(1.f), e);
        float32x4_t t = vmulq_f32(v, u);
        vst1q_f32(y + i, vmulq_f32(vdupq_n_f32(0.5f), t));
    }
    for (; i < count; ++i) {
        float v = x[i];
        float e = erf_apx(v * kInvSqrt2);
        float u = 1.f + e;
        float t = v * u;
        y[i] = 0.5f * t;
    }
}

void dwconv_neon(const float* src, int h, int w, int c,
                 const float* taps, const float* bias,
                 int kh, int kw, int stride, int pad_top, int pad_left,
                 float* dst, int oh, int ow) {
    int c4 = c & ~3;
    for (int oy = 0; oy < oh; ++oy) {
        int y0 = oy * stride - pad_top;
        int ky0 = std::max(0, -y0);
        int ky1 = std::min(kh, h - y0);
        for (int ox = 0; ox < ow; ++ox) {
            int x0 = ox * stride - pad_left;
            int kx0 = std::max(0, -x0);
            int kx1 = std::min(kw, w - x0);
            float* out = dst + (static_cast<size_t>(oy) * ow + ox) * c;
            int ch = 0;
            for (; ch < c4; ch += 4) {
                float32x4_t acc = vld1q_f32(bias + ch);
                for (int ky = ky0; ky < ky1; ++ky) {
                    const float* xrow =
                        src + ((static_cast<size_t>(y0 + ky)) * w + (x0 + kx0)) * c + ch;
                    const float* trow =
                        taps + (static_cast<size_t>(ky) * kw + kx0) * c + ch;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(xrow), vld1q_f32(trow)));
                        xrow += c;
                        trow += c;
                    }
                }
                vst1q_f32(out + ch, acc);
            }
            for (; ch < c; ++ch) {
                float acc = bias[ch];
                for (int ky = ky0; ky < ky1; ++ky) {
                    const float* xrow =
                        src + ((static_cast<size_t>(y0 + ky)) * w + (x0 + kx0)) * c + ch;
                    const float* trow =
                        taps + (static_cast<size_t>(ky) * kw + kx0) * c + ch;
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

// 4x8 register-tiled FMA matmul over a packed K x 8 panel of b.
void matmul_neon(const float* a, int m, int k,
                 const float* b, const float* bias,
                 float* dst, int n) {
    thread_local std::vector<float> panel;
    panel.resize(static_cast<size_t>(k) * 8);

    int n0 = 0;
    for (; n0 + 8 <= n; n0 += 8) {
        float* pp = panel.data();
        for (int kk = 0; kk < k; ++kk) {
            const float* brow = b + static_cast<size_t>(kk) * n + n0;
            vst1q_f32(pp, vld1q_f32(brow));
            vst1q_f32(pp + 4, vld1q_f32(brow + 4));
            pp += 8;
        }
        float32x4_t bias_lo = bias ? vld1q_f32(bias + n0) : vdupq_n_f32(0.f);
        float32x4_t bias_hi = bias ? vld1q_f32(bias + n0 + 4) : vdupq_n_f32(0.f);

        int i = 0;
        for (; i + 4 <= m; i += 4) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            const float* a1 = a0 + k;
            const float* a2 = a1 + k;
            const float* a3 = a2 + k;
            float32x4_t c00 = bias_lo, c01 = bias_hi;
            float32x4_t c10 = bias_lo, c11 = bias_hi;
            float32x4_t c20 = bias_lo, c21 = bias_hi;
            float32x4_t c30 = bias_lo, c31 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                float32x4_t b0 = vld1q_f32(pb);
                float32x4_t b1 = vld1q_f32(pb + 4);
                pb += 8;
                float32x4_t av = vdupq_n_f32(a0[kk]);
                c00 = vfmaq_f32(c00, av, b0);
                c01 = vfmaq_f32(c01, av, b1);
                av = vdupq_n_f32(a1[kk]);
                c10 = vfmaq_f32(c10, av, b0);
                c11 = vfmaq_f32(c11, av, b1);
                av = vdupq_n_f32(a2[kk]);
                c20 = vfmaq_f32(c20, av, b0);
                c21 = vfmaq_f32(c21, av, b1);
                av = vdupq_n_f32(a3[kk]);
                c30 = vfmaq_f32(c30, av, b0);
                c31 = vfmaq_f32(c31, av, b1);
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            vst1q_f32(d0, c00);
            vst1q_f32(d0 + 4, c01);
            vst1q_f32(d0 + n, c10);
            vst1q_f32(d0 + n + 4, c11);
            vst1q_f32(d0 + 2 * static_cast<size_t>(n), c20);
            vst1q_f32(d0 + 2 * static_cast<size_t>(n) + 4, c21);
            vst1q_f32(d0 + 3 * static_cast<size_t>(n), c30);
            vst1q_f32(d0 + 3 * static_cast<size_t>(n) + 4, c31);
        }
        for (; i < m; ++i) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            float32x4_t c0 = bias_lo, c1 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                float32x4_t av = vdupq_n_f32(a0[kk]);
                c0 = vfmaq_f32(c0, av, vld1q_f32(pb));
                c1 = vfmaq_f32(c1, av, vld1q_f32(pb + 4));
                pb += 8;
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            vst1q_f32(d0, c0);
            vst1q_f32(d0 + 4, c1);
        }
    }
    for (int j = n0; j < n; ++j) {
        for (int i = 0; i < m; ++i) {
            const float* arow = a + static_cast<size_t>(i) * k;
            float acc = bias ? bias[j] : 0.f;
            const float* bp = b + j;
            for (int kk = 0; kk < k; ++kk) {
                acc = std::fma(arow[kk], bp[0], acc);
                bp += n;
            }
            dst[static_cast<size_t>(i) * n + j] = acc;
        }
    }
}

void affine_ch_neon(const float* x, size_t pixels, int c,
                    const float* scale, const float* shift, float* y) {
    int c4 = c & ~3;
    for (size_t p = 0; p < pixels; ++p) {
        const float* xr = x + p * c;
        float* yr = y + p * c;
        int ch = 0;
        for (; ch < c4; ch += 4) {
            float32x4_t v = vmulq_f32(vld1q_f32(xr + ch), vld1q_f32(scale + ch));
            vst1q_f32(yr + ch, vaddq_f32(v, vld1q_f32(shift + ch)));
        }
        for (; ch < c; ++ch)
            yr[ch] = xr[ch] * scale[ch] + shift[ch];
    }
}

void add_neon(const float* a, const float* b, float* y, size_t count) {
    size_t i = 0;
    for (; i + 4 <= count; i += 4)
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < count; ++i)
        y[i] = a[i] + b[i];
}

} // namespace

const Backend& neon_backend() {
    static const Backend k = {
        "neon",
        dwconv_neon,
        matmul_neon,
        affine_ch_neon,
        add_neon,
        gelu_neon,
    };
    return k;
}

} // namespace kernels
} // namespace ravit

#endif
