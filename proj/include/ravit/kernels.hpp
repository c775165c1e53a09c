#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ravit {
namespace kernels {

// Inner-loop primitives with one scalar reference implementation and
// SIMD variants selected at runtime. All variants are deterministic;
// dwconv/affine/add/gelu lanes match the scalar lane bitwise, matmul
// lanes may differ by accumulation rounding (covered by equivalence
// tests).
struct Backend {
    const char* name;

    // Depthwise 2-d conv, NHWC. taps is tap-major: [ky*kw+kx][channel].
    // Caller precomputes output extents; bottom/right padding is implied
    // by clipping against the input box.
    void (*dwconv)(const float* src, int h, int w, int c,
                   const float* taps, const float* bias,
                   int kh, int kw, int stride, int pad_top, int pad_left,
                   float* dst, int oh, int ow);

    // c[m][n] = sum_k a[m][k] * b[k][n] + bias[n]; b is row-major K x N,
    // bias may be null.
    void (*matmul)(const float* a, int m, int k,
                   const float* b, const float* bias,
                   float* dst, int n);

    // y[p][ch] = x[p][ch] * scale[ch] + shift[ch]
    void (*affine_ch)(const float* x, size_t pixels, int c,
                      const float* scale, const float* shift, float* y);

    // y = a + b, elementwise
    void (*add)(const float* a, const float* b, float* y, size_t count);

    // y = gelu(x), erf form
    void (*gelu)(const float* x, float* y, size_t count);
};

const Backend& scalar_backend();
#if defined(__AVX2__) || defined(RAVIT_HAVE_AVX2)
const Backend& avx2_backend();
#endif
#if defined(__AVX512F__) || defined(RAVIT_HAVE_AVX512)
const Backend& avx512_backend();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
const Backend& neon_backend();
#endif

// Active backend: picked once from CPU features, overridable via the
// RAVIT_KERNELS env var or set_active(). Returns the previous name.
const Backend& active();
std::string set_active(const std::string& name);
std::vector<std::string> available_backends();

// Scalar erf/exp used by every gelu lane; exposed for accuracy tests.
float erf_apx(float x);
float exp_apx(float x);

} // namespace kernels
} // namespace ravit
