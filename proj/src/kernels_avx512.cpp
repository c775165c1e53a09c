#include "ravit/kernels.hpp"

#include <immintrin.h>

#include <cstddef>
#include <vector>

#include "kernels_common.hpp"

namespace ravit {
namespace kernels {
namespace {

// Float bitwise ops through the integer domain; plain avx512f has no
// _mm512_and_ps and friends.
inline __m512 and_ps(__m512 a, __m512 b) {
    return _mm512_castsi512_ps(_mm512_and_epi32(_mm512_castps_si512(a),
                                                _mm512_castps_si512(b)));
}
inline __m512 andnot_ps(__m512 a, __m512 b) {
    return _mm512_castsi512_ps(_mm512_andnot_epi32(_mm512_castps_si512(a),
                                                   _mm512_castps_si512(b)));
}
inline __m512 or_ps(__m512 a, __m512 b) {
    return _mm512_castsi512_ps(_mm512_or_epi32(_mm512_castps_si512(a),
                                               _mm512_castps_si512(b)));
}

// 16-lane transliteration of exp_apx, operation sequence in lockstep
// with the scalar lane so results match bitwise.
inline __m512 exp_ps(__m512 x) {
    x = _mm512_min_ps(x, _mm512_set1_ps(kExpHiClamp));
    x = _mm512_max_ps(x, _mm512_set1_ps(kExpLoClamp));

    __m512 kf = _mm512_roundscale_ps(_mm512_mul_ps(x, _mm512_set1_ps(kLog2E)),
                                     _MM_FROUND_TO_NEAREST_INT |
                                         _MM_FROUND_NO_EXC);
    __m512 r = _mm512_sub_ps(x, _mm512_mul_ps(kf, _mm512_set1_ps(kLn2Hi)));
    r = _mm512_sub_ps(r, _mm512_mul_ps(kf, _mm512_set1_ps(kLn2Lo)));

    __m512 p = _mm512_set1_ps(kExpC0);
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpC1));
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpC2));
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpC3));
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpC4));
    p = _mm512_add_ps(_mm512_mul_ps(p, r), _mm512_set1_ps(kExpC5));
    __m512 y = _mm512_add_ps(
        _mm512_add_ps(_mm512_mul_ps(p, _mm512_mul_ps(r, r)), r),
        _mm512_set1_ps(1.f));

    __m512i k = _mm512_cvtps_epi32(kf);
    __m512i bits = _mm512_slli_epi32(_mm512_add_epi32(k, _mm512_set1_epi32(127)), 23);
    return _mm512_mul_ps(y, _mm512_castsi512_ps(bits));
}

inline __m512 erf_ps(__m512 x) {
    const __m512 sign_mask = _mm512_set1_ps(-0.f);
    __m512 sign = and_ps(x, sign_mask);
    __m512 ax = andnot_ps(sign_mask, x);

    __m512 t = _mm512_div_ps(
        _mm512_set1_ps(1.f),
        _mm512_add_ps(_mm512_set1_ps(1.f),
                      _mm512_mul_ps(_mm512_set1_ps(kErfP), ax)));
    __m512 poly = _mm512_set1_ps(kErfA5);
    poly = _mm512_add_ps(_mm512_mul_ps(poly, t), _mm512_set1_ps(kErfA4));
    poly = _mm512_add_ps(_mm512_mul_ps(poly, t), _mm512_set1_ps(kErfA3));
    poly = _mm512_add_ps(_mm512_mul_ps(poly, t), _mm512_set1_ps(kErfA2));
    poly = _mm512_add_ps(_mm512_mul_ps(poly, t), _mm512_set1_ps(kErfA1));
    poly = _mm512_mul_ps(poly, t);

    __m512 axax = _mm512_mul_ps(ax, ax);
    __m512 e = exp_ps(_mm512_sub_ps(_mm512_setzero_ps(), axax));
    __m512 r = _mm512_sub_ps(_mm512_set1_ps(1.f), _mm512_mul_ps(poly, e));
    return or_ps(r, sign);
}

void gelu_avx512(const float* x, float* y, size_t count) {
    size_t i = 0;
    const __m512 inv_sqrt2 = _mm512_set1_ps(kInvSqrt2);
    const __m512 one = _mm512_set1_ps(1.f);
    const __m512 half = _mm512_set1_ps(0.5f);
    for (; i + 16 <= count; i += 16) {
        __m512 v = _mm512_loadu_ps(x + i);
        __m512 e = erf_ps(_mm512_mul_ps(v, inv_sqrt2));
        __m512 u = _mm512_add_ps(one, e);
        __m512 t = _mm512_mul_ps(v, u);
        _mm512_storeu_ps(y + i, _mm512_mul_ps(half, t));
    }
    for (; i < count; ++i) {
        float v = x[i];
        float e = erf_apx(v * kInvSqrt2);
        float u = 1.f + e;
        float t = v * u;
        y[i] = 0.5f * t;
    }
}

// 16-lane widening of the avx2 matmul: 6x32 register tile over a packed
// K x 32 panel of b, masked loads and stores on the ragged n edge. Each
// output element accumulates along k in the same order with one fused
// multiply-add per step, so results are bitwise identical to the avx2
// lane and differ from scalar only by the fused rounding.
void matmul_avx512(const float* a, int m, int k,
                   const float* b, const float* bias,
                   float* dst, int n) {
    thread_local std::vector<float> panel;
    panel.resize(static_cast<size_t>(k) * 32);

    for (int n0 = 0; n0 < n; n0 += 32) {
        const int nw = n - n0 < 32 ? n - n0 : 32;
        const __mmask16 mlo =
            nw >= 16 ? static_cast<__mmask16>(0xFFFF)
                     : static_cast<__mmask16>((1u << nw) - 1);
        const __mmask16 mhi =
            nw <= 16 ? static_cast<__mmask16>(0)
                     : static_cast<__mmask16>((1u << (nw - 16)) - 1);

        float* pp = panel.data();
        for (int kk = 0; kk < k; ++kk) {
            const float* brow = b + static_cast<size_t>(kk) * n + n0;
            _mm512_storeu_ps(pp, _mm512_maskz_loadu_ps(mlo, brow));
            _mm512_storeu_ps(pp + 16, _mm512_maskz_loadu_ps(mhi, brow + 16));
            pp += 32;
        }
        const __m512 bias_lo =
            bias ? _mm512_maskz_loadu_ps(mlo, bias + n0) : _mm512_setzero_ps();
        const __m512 bias_hi =
            bias ? _mm512_maskz_loadu_ps(mhi, bias + n0 + 16)
                 : _mm512_setzero_ps();

        int i = 0;
        for (; i + 6 <= m; i += 6) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            __m512 c00 = bias_lo, c01 = bias_hi;
            __m512 c10 = bias_lo, c11 = bias_hi;
            __m512 c20 = bias_lo, c21 = bias_hi;
            __m512 c30 = bias_lo, c31 = bias_hi;
            __m512 c40 = bias_lo, c41 = bias_hi;
            __m512 c50 = bias_lo, c51 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                const __m512 b0 = _mm512_loadu_ps(pb);
                const __m512 b1 = _mm512_loadu_ps(pb + 16);
                pb += 32;
                __m512 av = _mm512_set1_ps(a0[kk]);
                c00 = _mm512_fmadd_ps(av, b0, c00);
                c01 = _mm512_fmadd_ps(av, b1, c01);
                av = _mm512_set1_ps(a0[k + kk]);
                c10 = _mm512_fmadd_ps(av, b0, c10);
                c11 = _mm512_fmadd_ps(av, b1, c11);
                av = _mm512_set1_ps(a0[2 * static_cast<size_t>(k) + kk]);
                c20 = _mm512_fmadd_ps(av, b0, c20);
                c21 = _mm512_fmadd_ps(av, b1, c21);
                av = _mm512_set1_ps(a0[3 * static_cast<size_t>(k) + kk]);
                c30 = _mm512_fmadd_ps(av, b0, c30);
                c31 = _mm512_fmadd_ps(av, b1, c31);
                av = _mm512_set1_ps(a0[4 * static_cast<size_t>(k) + kk]);
                c40 = _mm512_fmadd_ps(av, b0, c40);
                c41 = _mm512_fmadd_ps(av, b1, c41);
                av = _mm512_set1_ps(a0[5 * static_cast<size_t>(k) + kk]);
                c50 = _mm512_fmadd_ps(av, b0, c50);
                c51 = _mm512_fmadd_ps(av, b1, c51);
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            _mm512_mask_storeu_ps(d0, mlo, c00);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c01);
            d0 += n;
            _mm512_mask_storeu_ps(d0, mlo, c10);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c11);
            d0 += n;
            _mm512_mask_storeu_ps(d0, mlo, c20);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c21);
            d0 += n;
            _mm512_mask_storeu_ps(d0, mlo, c30);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c31);
            d0 += n;
            _mm512_mask_storeu_ps(d0, mlo, c40);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c41);
            d0 += n;
            _mm512_mask_storeu_ps(d0, mlo, c50);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c51);
        }
        for (; i < m; ++i) {
            const float* a0 = a + static_cast<size_t>(i) * k;
            __m512 c0 = bias_lo, c1 = bias_hi;
            const float* pb = panel.data();
            for (int kk = 0; kk < k; ++kk) {
                const __m512 av = _mm512_set1_ps(a0[kk]);
                c0 = _mm512_fmadd_ps(av, _mm512_loadu_ps(pb), c0);
                c1 = _mm512_fmadd_ps(av, _mm512_loadu_ps(pb + 16), c1);
                pb += 32;
            }
            float* d0 = dst + static_cast<size_t>(i) * n + n0;
            _mm512_mask_storeu_ps(d0, mlo, c0);
            _mm512_mask_storeu_ps(d0 + 16, mhi, c1);
        }
    }
}

} // namespace

// matmul and gelu dominate the forward pass and gain from the wider
// registers; the memory-bound primitives stay on the avx2 lane.
const Backend& avx512_backend() {
    static const Backend k = [] {
        Backend b = avx2_backend();
        b.name = "avx512";
        b.matmul = matmul_avx512;
        b.gelu = gelu_avx512;
        return b;
    }();
    return k;
}

} // namespace kernels
} // namespace ravit
