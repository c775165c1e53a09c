#include "ravit/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "kernels_common.hpp"

namespace ravit {
namespace kernels {
namespace {

// 8-lane transliteration of exp_apx; keep the operation sequence in
// lockstep with the scalar lane so results match bitwise.
inline __m256 exp_ps(__m256 x) {
    x = _mm256_min_ps(x, _mm256_set1_ps(kExpHiClamp));
    x = _mm256_max_ps(x, _mm256_set1_ps(kExpLoClamp));

    __m256 kf = _mm256_round_ps(_mm256_mul_ps(x, _mm256_set1_ps(kLog2E)),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256 r = _mm256_sub_ps(x, _mm256_mul_ps(kf, _mm256_set1_ps(kLn2Hi)));
    r = _mm256_sub_ps(r, _mm256_mul_ps(kf, _mm256_set1_ps(kLn2Lo)));

    __m256 p = _mm256_set1_ps(kExpC0);
    p = _mm256_add_ps(_mm256_mul_ps(p, r), _mm256_set1_ps(kExpC1));
    p = _mm256_add_ps(_mm256_mul_ps(p, r), _mm256_set1_ps(kExpC2));
    p = _mm256_add_ps(_mm256_mul_ps(p, r), _mm256_set1_ps(kExpC3));
    p = _mm256_add_ps(_mm256_mul_ps(p, r), _mm256_set1_ps(kExpC4));
    p = _mm256_add_ps(_mm256_mul_ps(p, r), _mm256_set1_ps(kExpC5));
    __m256 y = _mm256_add_ps(
        _mm256_add_ps(_mm256_mul_ps(p, _mm256_mul_ps(r, r)), r),
        _mm256_set1_ps(1.f));

    __m256i k = _mm256_cvtps_epi32(kf);
    __m256i bits = _mm256_slli_epi32(_mm256_add_epi32(k, _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(bits));
}

inline __m256 erf_ps(__m256 x) {
    const __m256 sign_mask = _mm256_set1_ps(-0.f);
    __m256 sign = _mm256_and_ps(x, sign_mask);
    __m256 ax = _mm256_andnot_ps(sign_mask, x);

    __m256 t = _mm256_div_ps(
        _mm256_set1_ps(1.f),
        _mm256_add_ps(_mm256_set1_ps(1.f),
                      _mm256_mul_ps(_mm256_set1_ps(kErfP), ax)));
    __m256 poly = _mm256_set1_ps(kErfA5);
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kErfA4));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kErfA3));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kErfA2));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kErfA1));
    poly = _mm256_mul_ps(poly, t);

    __m256 axax = _mm256_mul_ps(ax, ax);
    __m256 e = exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), axax));
    __m256 r = _mm256_sub_ps(_mm256_set1_ps(1.f), _mm256_mul_ps(poly, e));
    return _mm256_or_ps(r, sign);
}

void gelu_avx2(const float* x, float* y, size_t count) {
    size_t i = 0;
    const __m256 inv_sqrt2 = _mm256_set1_ps(kInvSqrt2);
    const __m256 one = _mm256_set1_ps(1.f);
    const __m256 half = _mm256_set1_ps(0.5f);
    for (; i + 8 <= count; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        __m256 e = erf_ps(_mm256_mul_ps(v, inv_sqrt2));
        __m256 u = _mm256_add_ps(one, e);
        __m256 t = _mm256_mul_ps(v, u);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(half, t));
    }
    for (; i < count; ++i) {
        float v = x[i];
        float e = erf_apx(v * kInvSqrt2);
        float u = 1.f + e;
        float t = v * u;
        y[i] = 0.5f * t;
    }
}

// Channels-inner depthwise conv: one 8-wide accumulator register per
// channel octet, taps walked in the same ascending order as the scalar
// lane, mul+add (not fmadd) so the two lanes agree bitwise.
void dwconv_avx2(const float* src, int h, int w, int c,
                 const float* taps, const float* bias,
                 int kh, int kw, int stride, int pad_top, int pad_left,
                 float* dst, int oh, int ow) {
    int c8 = c & ~7;
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
            for (; ch < c8; ch += 8) {
                __m256 acc = _mm256_loadu_ps(bias + ch);
                for (int ky = ky0; ky < ky1; ++ky) {
                    const float* xrow =
                        src + ((static_cast<size_t>(y0 + ky)) * w + (x0 + kx0)) * c + ch;
                    const float* trow =
                        taps + (static_cast<size_t>(ky) * kw + kx0) * c + ch;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        acc = _mm256_add_ps(
                            acc, _mm256_mul_ps(_mm256_loadu_ps(xrow),
                                               _mm256_loadu_ps(trow)));
                        xrow += c;
                        trow += c;
                    }
                }
                _mm256_storeu_ps(out + ch, acc);
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

// 4x16 register-tiled FMA matmul over a packed K x 16 panel of b.
// Accumulation order over k matches the scalar lane; only the fused
// rounding differs.
void matmul_avx2(const float* a, int m, int k,
                 const float* b, const float* bias,
                 float* dst, int n) {
    thread_local std::vector<float> panel;
    panel.resize(static_cast<size_t>(k) * 16);

    int n0 = 0;
    for (; n0 + 16 <= n; n0 += 16) {
        float* pp = panel.data();
        for (int kk = 0; kk < k; ++kk) {
            const float* brow = b + static_cast<size_t>(kk) * n + n0;
            _mm256_storeu_ps(pp, _mm256_loadu_ps(brow));
            _mm256_storeu_ps(pp + 8, _mm256_loadu_ps(brow + 8));
            pp += 16;
        }
        __m256 bias_lo = bias ? _mm256_loadu_ps(bias + n0) : _mm256_setzero_ps();
        __m256 bias_hi = bias ? _mm256_loadu_ps(bias + n0 + 8) : _mm256_setzero_ps();

        int i = 0;
        for (; i + 4 <= m; i += 4) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            const float* a1 = a0 + k;
            const float* a2 = a1 + k;
            const float* a3 = a2 + k;
            __m256 c00 = bias_lo, c01 = bias_hi;
            __m256 c10 = bias_lo, c11 = bias_hi;
            __m256 c20 = bias_lo, c21 = bias_hi;
            __m256 c30 = bias_lo, c31 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                __m256 b0 = _mm256_loadu_ps(pb);
                __m256 b1 = _mm256_loadu_ps(pb + 8);
                pb += 16;
                __m256 av = _mm256_broadcast_ss(a0 + kk);
                c00 = _mm256_fmadd_ps(av, b0, c00);
                c01 = _mm256_fmadd_ps(av, b1, c01);
                av = _mm256_broadcast_ss(a1 + kk);
                c10 = _mm256_fmadd_ps(av, b0, c10);
                c11 = _mm256_fmadd_ps(av, b1, c11);
                av = _mm256_broadcast_ss(a2 + kk);
                c20 = _mm256_fmadd_ps(av, b0, c20);
                c21 = _mm256_fmadd_ps(av, b1, c21);
                av = _mm256_broadcast_ss(a3 + kk);
                c30 = _mm256_fmadd_ps(av, b0, c30);
                c31 = _mm256_fmadd_ps(av, b1, c31);
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            _mm256_storeu_ps(d0, c00);
            _mm256_storeu_ps(d0 + 8, c01);
            _mm256_storeu_ps(d0 + n, c10);
            _mm256_storeu_ps(d0 + n + 8, c11);
            _mm256_storeu_ps(d0 + 2 * static_cast<size_t>(n), c20);
            _mm256_storeu_ps(d0 + 2 * static_cast<size_t>(n) + 8, c21);
            _mm256_storeu_ps(d0 + 3 * static_cast<size_t>(n), c30);
            _mm256_storeu_ps(d0 + 3 * static_cast<size_t>(n) + 8, c31);
        }
        for (; i < m; ++i) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            __m256 c0 = bias_lo, c1 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                __m256 av = _mm256_broadcast_ss(a0 + kk);
                c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(pb), c0);
                c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(pb + 8), c1);
                pb += 16;
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            _mm256_storeu_ps(d0, c0);
            _mm256_storeu_ps(d0 + 8, c1);
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

void affine_ch_avx2(const float* x, size_t pixels, int c,
                    const float* scale, const float* shift, float* y) {
    int c8 = c & ~7;
    for (size_t p = 0; p < pixels; ++p) {
        const float* xr = x + p * c;
        float* yr = y + p * c;
        int ch = 0;
        for (; ch < c8; ch += 8) {
            __m256 v = _mm256_mul_ps(_mm256_loadu_ps(xr + ch),
                                     _mm256_loadu_ps(scale + ch));
            _mm256_storeu_ps(yr + ch,
                             _mm256_add_ps(v, _mm256_loadu_ps(shift + ch)));
        }
        for (; ch < c; ++ch)
            yr[ch] = xr[ch] * scale[ch] + shift[ch];
    }
}

void add_avx2(const float* a, const float* b, float* y, size_t count) {
    size_t i = 0;
    for (; i + 8 <= count; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                              _mm256_loadu_ps(b + i)));
    for (; i < count; ++i)
        y[i] = a[i] + b[i];
}

} // namespace

const Backend& avx2_backend() {
    static const Backend k = {
        "avx2",
        dwconv_avx2,
        matmul_avx2,
        affine_ch_avx2,
        add_avx2,
        gelu_avx2,
    };
    return k;
}

} // namespace kernels
} // namespace ravit
