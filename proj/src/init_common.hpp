#pragma once

#include <cmath>
#include <vector>

#include "ravit/blocks.hpp"
#include "ravit/rng.hpp"

namespace ravit {

// Seeded weight-initialization helpers shared by the model builders.
// Weights scale with 1/sqrt(fan-in) and batch-norm statistics sit near
// the unit variance they would estimate on such activations, so random
// models keep trained-network magnitudes through any depth.
inline void fill_normal(std::vector<float>& v, Rng& rng, float stddev) {
    for (float& x : v)
        x = rng.normal(0.f, stddev);
}

inline void init_bn(BnParams& bn, Rng& rng) {
    for (float& g : bn.gamma)
        g = rng.uniform(0.9f, 1.1f);
    for (float& b : bn.beta)
        b = rng.normal(0.f, 0.02f);
    for (float& m : bn.mean)
        m = rng.normal(0.f, 0.02f);
    for (float& s : bn.var)
        s = rng.uniform(0.9f, 1.1f);
}

// residual branches start low-gain, as trained norms do, so stacking
// dozens of x + Norm(f(x)) sub-blocks cannot blow magnitudes up
inline void damp_bn(BnParams& bn, float gain) {
    for (float& g : bn.gamma)
        g *= gain;
}

inline Mat random_mat(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    fill_normal(m.data, rng, 1.f / std::sqrt(static_cast<float>(rows)));
    return m;
}

inline std::vector<float> random_vec(int n, Rng& rng) {
    std::vector<float> v(static_cast<size_t>(n));
    fill_normal(v, rng, 0.01f);
    return v;
}

inline void fill_dw(DwWeights& w, Rng& rng) {
    fill_normal(w.data, rng, 1.f / std::sqrt(static_cast<float>(w.kh * w.kw)));
}

inline DwSite random_dw_site(int k, int channels, int stride, Rng& rng) {
    DwSite site = DwSite::make(k, channels, stride);
    fill_dw(site.set.main, rng);
    fill_dw(site.set.branch1, rng);
    fill_dw(site.set.branch2a, rng);
    fill_dw(site.set.branch2b, rng);
    fill_dw(site.set.branch3a, rng);
    fill_dw(site.set.branch3b, rng);
    init_bn(site.set.bn, rng);
    return site;
}

} // namespace ravit
