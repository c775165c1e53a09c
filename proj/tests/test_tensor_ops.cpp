#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "ravit/ops.hpp"
#include "ravit/rng.hpp"

using namespace ravit;

namespace {

Tensor4 random_tensor(int n, int h, int w, int c, Rng& rng, float stddev = 1.f) {
    Tensor4 t(n, h, w, c);
    for (float& x : t.data)
        x = rng.normal(0.f, stddev);
    return t;
}

DwWeights random_dw(int kh, int kw, int c, Rng& rng) {
    DwWeights wgt(kh, kw, c);
    for (float& x : wgt.data)
        x = rng.normal(0.f, 1.f);
    return wgt;
}

std::vector<float> random_vec(int n, Rng& rng) {
    std::vector<float> v(static_cast<size_t>(n));
    for (float& x : v)
        x = rng.normal(0.f, 1.f);
    return v;
}

// Independent double-precision reference, plain nested loops.
void check_conv_dw_case(const Tensor4& x, const DwWeights& wgt,
                        const std::vector<float>& bias, int stride, Padding pad) {
    Tensor4 got = conv_dw(x, wgt, bias, stride, pad);
    const int oh = (x.h + pad.top + pad.bottom - wgt.kh) / stride + 1;
    const int ow = (x.w + pad.left + pad.right - wgt.kw) / stride + 1;
    REQUIRE(got.n == x.n);
    REQUIRE(got.h == oh);
    REQUIRE(got.w == ow);
    REQUIRE(got.c == x.c);
    for (int n = 0; n < x.n; ++n)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ch = 0; ch < x.c; ++ch) {
                    double acc = bias[ch];
                    for (int ky = 0; ky < wgt.kh; ++ky)
                        for (int kx = 0; kx < wgt.kw; ++kx) {
                            const int iy = oy * stride - pad.top + ky;
                            const int ix = ox * stride - pad.left + kx;
                            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                                continue;
                            acc += static_cast<double>(x.at(n, iy, ix, ch)) *
                                   wgt.at(ch, ky, kx);
                        }
                    REQUIRE(std::fabs(got.at(n, oy, ox, ch) - acc) <= 1e-5);
                }
}

} // namespace

TEST_CASE("depthwise conv matches a double-precision oracle on random cases") {
    Rng rng(11);
    int cases = 0;
    while (cases < 120) {
        int h = 1 + static_cast<int>(rng.uniform() * 12);
        int w = 1 + static_cast<int>(rng.uniform() * 12);
        int c = 1 + static_cast<int>(rng.uniform() * 24);
        int n = 1 + static_cast<int>(rng.uniform() * 2);
        const int extents[] = {1, 3, 5, 7};
        int kh = extents[static_cast<int>(rng.uniform() * 4)];
        int kw = extents[static_cast<int>(rng.uniform() * 4)];
        int stride = 1 + static_cast<int>(rng.uniform() * 2);
        Padding pad = (cases % 3 == 0)
                          ? Padding{static_cast<int>(rng.uniform() * 3),
                                    static_cast<int>(rng.uniform() * 3),
                                    static_cast<int>(rng.uniform() * 3),
                                    static_cast<int>(rng.uniform() * 3)}
                          : same_pad(kh, kw);
        if (conv_out_extent(h, kh, pad.top, pad.bottom, stride) <= 0 ||
            conv_out_extent(w, kw, pad.left, pad.right, stride) <= 0)
            continue;
        Tensor4 x = random_tensor(n, h, w, c, rng);
        DwWeights wgt = random_dw(kh, kw, c, rng);
        std::vector<float> bias = random_vec(c, rng);
        check_conv_dw_case(x, wgt, bias, stride, pad);
        ++cases;
    }
    CHECK(cases == 120);
}

TEST_CASE("depthwise conv hand example with zero padding") {
    // 1x3x3x1 input, 3x3 kernel of ones, zero bias: center output is the
    // full sum, corners see only the in-bounds 2x2 patch
    Tensor4 x(1, 3, 3, 1);
    for (int i = 0; i < 9; ++i)
        x.data[i] = static_cast<float>(i + 1); // 1..9
    DwWeights wgt(3, 3, 1);
    std::fill(wgt.data.begin(), wgt.data.end(), 1.f);
    Tensor4 y = conv_dw(x, wgt, {0.f}, 1, same_pad(3, 3));
    REQUIRE(y.h == 3);
    REQUIRE(y.w == 3);
    CHECK(y.at(0, 1, 1, 0) == 45.f);              // 1+...+9
    CHECK(y.at(0, 0, 0, 0) == 1.f + 2 + 4 + 5);   // top-left patch
    CHECK(y.at(0, 2, 2, 0) == 5.f + 6 + 8 + 9);   // bottom-right patch
}

TEST_CASE("depthwise conv rejects malformed arguments") {
    Rng rng(12);
    Tensor4 x = random_tensor(1, 4, 4, 8, rng);
    DwWeights wgt = random_dw(3, 3, 8, rng);
    std::vector<float> bias = random_vec(8, rng);
    CHECK_THROWS_AS(conv_dw(x, random_dw(3, 3, 4, rng), bias, 1, same_pad(3, 3)),
                    std::invalid_argument);
    CHECK_THROWS_AS(conv_dw(x, wgt, random_vec(4, rng), 1, same_pad(3, 3)),
                    std::invalid_argument);
    CHECK_THROWS_AS(conv_dw(x, wgt, bias, 0, same_pad(3, 3)), std::invalid_argument);
    Tensor4 tiny = random_tensor(1, 1, 1, 8, rng);
    CHECK_THROWS_AS(conv_dw(tiny, random_dw(7, 7, 8, rng), bias, 1, Padding{0, 0, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("pointwise conv matches a double-precision oracle on random cases") {
    Rng rng(13);
    for (int cases = 0; cases < 100; ++cases) {
        int h = 1 + static_cast<int>(rng.uniform() * 8);
        int w = 1 + static_cast<int>(rng.uniform() * 8);
        int cin = 1 + static_cast<int>(rng.uniform() * 24);
        int cout = 1 + static_cast<int>(rng.uniform() * 24);
        Tensor4 x = random_tensor(1, h, w, cin, rng);
        Mat wgt(cout, cin);
        for (float& v : wgt.data)
            v = rng.normal(0.f, 1.f);
        std::vector<float> bias =
            (cases % 2 == 0) ? random_vec(cout, rng) : std::vector<float>{};
        Tensor4 got = conv_pw(x, wgt, bias);
        REQUIRE(got.c == cout);
        REQUIRE(got.h == h);
        REQUIRE(got.w == w);
        for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox)
                for (int co = 0; co < cout; ++co) {
                    double acc = bias.empty() ? 0.0 : bias[co];
                    for (int ci = 0; ci < cin; ++ci)
                        acc += static_cast<double>(x.at(0, oy, ox, ci)) * wgt.at(co, ci);
                    REQUIRE(std::fabs(got.at(0, oy, ox, co) - acc) <= 1e-5);
                }
    }
}

TEST_CASE("batch norm matches its closed form") {
    Rng rng(14);
    Tensor4 x = random_tensor(2, 5, 4, 12, rng);
    BnParams bn(12);
    for (int i = 0; i < 12; ++i) {
        bn.gamma[i] = rng.uniform(0.5f, 1.5f);
        bn.beta[i] = rng.normal(0.f, 1.f);
        bn.mean[i] = rng.normal(0.f, 1.f);
        bn.var[i] = rng.uniform(0.25f, 4.f);
    }
    Tensor4 y = batch_norm(x, bn);
    for (int n = 0; n < x.n; ++n)
        for (int iy = 0; iy < x.h; ++iy)
            for (int ix = 0; ix < x.w; ++ix)
                for (int ch = 0; ch < x.c; ++ch) {
                    double want = (x.at(n, iy, ix, ch) - bn.mean[ch]) /
                                      std::sqrt(static_cast<double>(bn.var[ch]) + bn.eps) *
                                      bn.gamma[ch] +
                                  bn.beta[ch];
                    REQUIRE(std::fabs(y.at(n, iy, ix, ch) - want) <= 1e-5);
                }
    SUBCASE("identity parameters pass input through") {
        BnParams id(12);
        Tensor4 z = batch_norm(x, id);
        for (size_t i = 0; i < x.data.size(); ++i)
            CHECK(z.data[i] == doctest::Approx(x.data[i]).epsilon(1e-5));
    }
    SUBCASE("malformed parameters are rejected") {
        BnParams bad(12);
        bad.var[3] = 0.f;
        CHECK_THROWS_AS(batch_norm(x, bad), std::invalid_argument);
        BnParams shortbn(8);
        CHECK_THROWS_AS(batch_norm(x, shortbn), std::invalid_argument);
    }
}

TEST_CASE("gelu fixed points and reference values") {
    Tensor4 x(1, 1, 1, 7);
    x.data = {0.f, 1.f, -1.f, 2.f, -2.f, 10.f, -10.f};
    Tensor4 y = gelu(x);
    CHECK(y.data[0] == 0.f);
    CHECK(y.data[1] == doctest::Approx(0.8413447461).epsilon(1e-5));
    CHECK(y.data[2] == doctest::Approx(-0.1586552539).epsilon(1e-5));
    CHECK(y.data[3] == doctest::Approx(1.9544997361).epsilon(1e-5));
    CHECK(y.data[4] == doctest::Approx(-0.0455002639).epsilon(1e-4));
    CHECK(y.data[5] == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(std::fabs(y.data[6]) <= 1e-6);
}

TEST_CASE("softmax rows are stable and sum to one") {
    Mat m(3, 4);
    float vals[] = {0, 0, 0, 0, 1000, 1000, 999, 999, -3, 0.5f, 2, -1};
    std::copy(vals, vals + 12, m.data.begin());
    Mat s = softmax_rows(m);
    for (int r = 0; r < 3; ++r) {
        double sum = 0;
        for (int c = 0; c < 4; ++c) {
            CHECK(std::isfinite(s.at(r, c)));
            sum += s.at(r, c);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(s.at(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(s.at(1, 0) == doctest::Approx(s.at(1, 1)).epsilon(1e-6));
    CHECK(s.at(1, 0) > s.at(1, 2)); // larger logit, larger weight

    // double-precision oracle on random rows
    Rng rng(15);
    Mat r2(20, 9);
    for (float& v : r2.data)
        v = rng.normal(0.f, 3.f);
    Mat s2 = softmax_rows(r2);
    for (int r = 0; r < r2.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < r2.cols; ++c)
            mx = std::max(mx, static_cast<double>(r2.at(r, c)));
        double den = 0;
        for (int c = 0; c < r2.cols; ++c)
            den += std::exp(static_cast<double>(r2.at(r, c)) - mx);
        for (int c = 0; c < r2.cols; ++c) {
            double want = std::exp(static_cast<double>(r2.at(r, c)) - mx) / den;
            REQUIRE(std::fabs(s2.at(r, c) - want) <= 1e-6);
        }
    }
}

TEST_CASE("global average pool matches a double-precision mean") {
    Rng rng(16);
    Tensor4 x = random_tensor(3, 6, 5, 7, rng);
    Mat m = global_avg_pool(x);
    REQUIRE(m.rows == 3);
    REQUIRE(m.cols == 7);
    for (int n = 0; n < 3; ++n)
        for (int ch = 0; ch < 7; ++ch) {
            double acc = 0;
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    acc += x.at(n, iy, ix, ch);
            acc /= x.h * x.w;
            REQUIRE(std::fabs(m.at(n, ch) - acc) <= 1e-6);
        }
}

TEST_CASE("nearest upsample doubles each axis by replication") {
    Rng rng(17);
    Tensor4 x = random_tensor(2, 3, 4, 5, rng);
    Tensor4 y = upsample_nearest2x(x);
    REQUIRE(y.h == 6);
    REQUIRE(y.w == 8);
    for (int n = 0; n < x.n; ++n)
        for (int iy = 0; iy < y.h; ++iy)
            for (int ix = 0; ix < y.w; ++ix)
                for (int ch = 0; ch < x.c; ++ch)
                    REQUIRE(y.at(n, iy, ix, ch) == x.at(n, iy / 2, ix / 2, ch));
}

TEST_CASE("channel concat and chunk round-trip") {
    Rng rng(18);
    Tensor4 x = random_tensor(2, 4, 4, 12, rng);
    auto parts = chunk_channels(x, 4);
    REQUIRE(parts.size() == 4);
    for (const Tensor4& p : parts)
        CHECK(p.c == 3);
    Tensor4 back = concat_channels(parts);
    REQUIRE(back.same_shape(x));
    CHECK(std::memcmp(back.data.data(), x.data.data(),
                      x.data.size() * sizeof(float)) == 0);

    CHECK_THROWS_AS(chunk_channels(x, 5), std::invalid_argument);
    Tensor4 other = random_tensor(2, 3, 4, 2, rng);
    CHECK_THROWS_AS(concat_channels({x, other}), std::invalid_argument);
}

TEST_CASE("elementwise add validates shapes") {
    Rng rng(19);
    Tensor4 a = random_tensor(1, 3, 3, 4, rng);
    Tensor4 b = random_tensor(1, 3, 3, 4, rng);
    Tensor4 y = add(a, b);
    for (size_t i = 0; i < y.data.size(); ++i)
        CHECK(y.data[i] == a.data[i] + b.data[i]);
    Tensor4 c = random_tensor(1, 3, 3, 5, rng);
    CHECK_THROWS_AS(add(a, c), std::invalid_argument);
}

TEST_CASE("mat_mul validates extents and applies bias") {
    Mat a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    Mat b(3, 2);
    b.data = {7, 8, 9, 10, 11, 12};
    Mat y = mat_mul(a, b, {100.f, 200.f});
    CHECK(y.at(0, 0) == 1 * 7 + 2 * 9 + 3 * 11 + 100);
    CHECK(y.at(0, 1) == 1 * 8 + 2 * 10 + 3 * 12 + 200);
    CHECK(y.at(1, 0) == 4 * 7 + 5 * 9 + 6 * 11 + 100);
    CHECK(y.at(1, 1) == 4 * 8 + 5 * 10 + 6 * 12 + 200);

    Mat bad(2, 2);
    CHECK_THROWS_AS(mat_mul(a, bad, {}), std::invalid_argument);
    CHECK_THROWS_AS(mat_mul(a, b, {1.f}), std::invalid_argument);

    Mat t = transpose(a);
    REQUIRE(t.rows == 3);
    REQUIRE(t.cols == 2);
    CHECK(t.at(0, 0) == 1);
    CHECK(t.at(2, 1) == 6);
}
