#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "ravit/kernels.hpp"
#include "ravit/rng.hpp"
#include "ravit/tensor.hpp"

using namespace ravit;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng, float stddev = 1.f) {
    std::vector<float> v(n);
    for (float& x : v)
        x = rng.normal(0.f, stddev);
    return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::vector<const kernels::Backend*> simd_backends() {
    std::vector<const kernels::Backend*> out;
    std::string prev = kernels::set_active("scalar");
    for (const std::string& name : kernels::available_backends()) {
        if (name == "scalar")
            continue;
        kernels::set_active(name);
        out.push_back(&kernels::active());
    }
    kernels::set_active(prev);
    return out;
}

} // namespace

TEST_CASE("erf approximation tracks the double-precision reference") {
    double worst = 0.0;
    for (double step = -6.0; step <= 6.0; step += 0.001) {
        float x = static_cast<float>(step);
        float got = kernels::erf_apx(x);
        double want = std::erf(static_cast<double>(x));
        worst = std::max(worst, std::fabs(got - want));
    }
    CHECK(worst <= 5e-7);
    CHECK(kernels::erf_apx(0.f) == 0.f);
    // odd symmetry including the sign of zero
    CHECK(std::signbit(kernels::erf_apx(-0.f)));
    CHECK(kernels::erf_apx(6.f) == doctest::Approx(1.f).epsilon(1e-7));
    CHECK(kernels::erf_apx(-6.f) == doctest::Approx(-1.f).epsilon(1e-7));
}

TEST_CASE("exp approximation tracks the double-precision reference") {
    double worst_rel = 0.0;
    for (double step = -87.0; step <= 88.0; step += 0.01) {
        float x = static_cast<float>(step);
        float got = kernels::exp_apx(x);
        double want = std::exp(static_cast<double>(x));
        worst_rel = std::max(worst_rel, std::fabs(got - want) / want);
    }
    CHECK(worst_rel <= 3e-7);
    CHECK(kernels::exp_apx(0.f) == 1.f);
    // clamps instead of overflowing to inf or underflowing to zero
    CHECK(std::isfinite(kernels::exp_apx(1000.f)));
    CHECK(kernels::exp_apx(-1000.f) > 0.f);
}

TEST_CASE("backend registry exposes scalar and honors set_active") {
    auto names = kernels::available_backends();
    REQUIRE(!names.empty());
    CHECK(names.front() == "scalar");

    std::string prev = kernels::set_active("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK_THROWS_AS(kernels::set_active("no-such-backend"), std::invalid_argument);
    CHECK(std::string(kernels::active().name) == "scalar"); // unchanged on failure
    kernels::set_active(prev);
}

TEST_CASE("SIMD dwconv matches scalar bitwise") {
    const kernels::Backend& ref = kernels::scalar_backend();
    Rng rng(101);
    for (const kernels::Backend* b : simd_backends()) {
        for (int trial = 0; trial < 60; ++trial) {
            int h = 1 + static_cast<int>(rng.uniform() * 13);
            int w = 1 + static_cast<int>(rng.uniform() * 13);
            int c = 1 + static_cast<int>(rng.uniform() * 36);
            int k = 1 + 2 * static_cast<int>(rng.uniform() * 4); // 1,3,5,7
            int stride = 1 + static_cast<int>(rng.uniform() * 2);
            Padding pad = same_pad(k, k);
            int oh = conv_out_extent(h, k, pad.top, pad.bottom, stride);
            int ow = conv_out_extent(w, k, pad.left, pad.right, stride);
            if (oh <= 0 || ow <= 0)
                continue;

            auto src = random_vec(static_cast<size_t>(h) * w * c, rng);
            auto taps = random_vec(static_cast<size_t>(k) * k * c, rng);
            auto bias = random_vec(c, rng);
            std::vector<float> want(static_cast<size_t>(oh) * ow * c);
            std::vector<float> got(want.size());
            ref.dwconv(src.data(), h, w, c, taps.data(), bias.data(),
                       k, k, stride, pad.top, pad.left, want.data(), oh, ow);
            b->dwconv(src.data(), h, w, c, taps.data(), bias.data(),
                      k, k, stride, pad.top, pad.left, got.data(), oh, ow);
            REQUIRE(bitwise_equal(want, got));
        }
    }
}

TEST_CASE("SIMD affine, add and gelu match scalar bitwise") {
    const kernels::Backend& ref = kernels::scalar_backend();
    Rng rng(202);
    for (const kernels::Backend* b : simd_backends()) {
        for (int trial = 0; trial < 40; ++trial) {
            size_t pixels = 1 + static_cast<size_t>(rng.uniform() * 50);
            int c = 1 + static_cast<int>(rng.uniform() * 40);
            size_t count = pixels * c;
            auto x = random_vec(count, rng, 2.f);
            auto x2 = random_vec(count, rng, 2.f);
            auto scale = random_vec(c, rng);
            auto shift = random_vec(c, rng);
            std::vector<float> want(count), got(count);

            ref.affine_ch(x.data(), pixels, c, scale.data(), shift.data(), want.data());
            b->affine_ch(x.data(), pixels, c, scale.data(), shift.data(), got.data());
            REQUIRE(bitwise_equal(want, got));

            ref.add(x.data(), x2.data(), want.data(), count);
            b->add(x.data(), x2.data(), got.data(), count);
            REQUIRE(bitwise_equal(want, got));

            ref.gelu(x.data(), want.data(), count);
            b->gelu(x.data(), got.data(), count);
            REQUIRE(bitwise_equal(want, got));
        }
        // edge values through gelu, including signed zero and big magnitudes
        std::vector<float> edge = {0.f, -0.f, 1.f, -1.f, 30.f, -30.f,
                                   1e-30f, -1e-30f, 87.f, -87.f};
        std::vector<float> want(edge.size()), got(edge.size());
        ref.gelu(edge.data(), want.data(), edge.size());
        b->gelu(edge.data(), got.data(), edge.size());
        REQUIRE(bitwise_equal(want, got));
    }
}

TEST_CASE("SIMD matmul matches scalar within accumulation tolerance") {
    const kernels::Backend& ref = kernels::scalar_backend();
    Rng rng(303);
    for (const kernels::Backend* b : simd_backends()) {
        for (int trial = 0; trial < 60; ++trial) {
            int m = 1 + static_cast<int>(rng.uniform() * 17);
            int k = 1 + static_cast<int>(rng.uniform() * 64);
            int n = 1 + static_cast<int>(rng.uniform() * 48);
            auto a = random_vec(static_cast<size_t>(m) * k, rng);
            auto bm = random_vec(static_cast<size_t>(k) * n, rng);
            auto bias = random_vec(n, rng);
            std::vector<float> want(static_cast<size_t>(m) * n);
            std::vector<float> got(want.size());
            const float* bias_ptr = (trial % 2 == 0) ? bias.data() : nullptr;
            ref.matmul(a.data(), m, k, bm.data(), bias_ptr, want.data(), n);
            b->matmul(a.data(), m, k, bm.data(), bias_ptr, got.data(), n);
            for (size_t i = 0; i < want.size(); ++i) {
                REQUIRE(std::fabs(want[i] - got[i]) <=
                        1e-5f * std::max(1.f, std::fabs(want[i])));
            }
        }
    }
}

TEST_CASE("matmul against a tiny hand example") {
    // [1 2; 3 4] x [5 6; 7 8] + [10, 20]
    const float a[] = {1, 2, 3, 4};
    const float b[] = {5, 6, 7, 8};
    const float bias[] = {10, 20};
    float out[4];
    kernels::scalar_backend().matmul(a, 2, 2, b, bias, out, 2);
    CHECK(out[0] == 29.f);
    CHECK(out[1] == 42.f);
    CHECK(out[2] == 53.f);
    CHECK(out[3] == 70.f);
}
