#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "ravit/image.hpp"
#include "ravit/rng.hpp"

using namespace ravit;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

std::string throw_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

void write_raw(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("ppm files parse with comments and exact pixel placement") {
    const std::string path = temp_path("ravit_img_parse.ppm");
    std::string bytes = "P6\n# fixture\n3 2\n# maxval next\n255\n";
    // 3x2 image, pixel (y, x) carries value 10*(y*3+x) in R, +1 G, +2 B
    for (int i = 0; i < 6; ++i) {
        bytes.push_back(static_cast<char>(10 * i));
        bytes.push_back(static_cast<char>(10 * i + 1));
        bytes.push_back(static_cast<char>(10 * i + 2));
    }
    write_raw(path, bytes);
    Tensor4 img = read_ppm(path);
    CHECK(img.n == 1);
    CHECK(img.h == 2);
    CHECK(img.w == 3);
    CHECK(img.c == 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(img.at(0, y, x, c) ==
                      static_cast<float>(10 * (y * 3 + x) + c) * (1.f / 255.f));
    std::filesystem::remove(path);
}

TEST_CASE("ppm writer and reader round-trip within quantization") {
    Rng rng(0x1417);
    Tensor4 img(1, 5, 7, 3);
    for (float& v : img.data)
        v = rng.uniform();
    const std::string path = temp_path("ravit_img_rt.ppm");
    write_ppm(path, img);
    Tensor4 back = read_ppm(path);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::fabs(back.data[i] - img.data[i]) <= 0.5f / 255.f + 1e-6f);
    // writing the read-back image again is byte-stable
    write_ppm(path, back);
    Tensor4 twice = read_ppm(path);
    CHECK(std::memcmp(twice.data.data(), back.data.data(),
                      back.data.size() * sizeof(float)) == 0);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(write_ppm(path, Tensor4(2, 2, 2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(write_ppm(path, Tensor4(1, 2, 2, 1)), std::invalid_argument);
}

TEST_CASE("malformed ppm files report the byte offset") {
    const std::string path = temp_path("ravit_img_bad.ppm");

    SUBCASE("wrong magic") {
        write_raw(path, "P5\n2 2\n255\n" + std::string(12, 'x'));
        const std::string msg = throw_message([&] { read_ppm(path); });
        CHECK(msg.find("not a P6") != std::string::npos);
        CHECK(msg.find("byte 0") != std::string::npos);
    }
    SUBCASE("unsupported maxval") {
        write_raw(path, "P6\n2 2\n65535\n" + std::string(24, 'x'));
        CHECK(throw_message([&] { read_ppm(path); }).find("maxval") != std::string::npos);
    }
    SUBCASE("missing header value") {
        write_raw(path, "P6\n2\n");
        CHECK(throw_message([&] { read_ppm(path); }).find("expected height") !=
              std::string::npos);
    }
    SUBCASE("truncated pixels") {
        write_raw(path, "P6\n2 2\n255\n" + std::string(5, 'x'));
        const std::string msg = throw_message([&] { read_ppm(path); });
        CHECK(msg.find("truncated") != std::string::npos);
        CHECK(msg.find("need 12") != std::string::npos);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_ppm(temp_path("ravit_img_nothere.ppm")), std::runtime_error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("channel normalization applies the per-channel affine") {
    Tensor4 img(1, 1, 2, 3);
    img.data = {0.5f, 0.5f, 0.5f, 1.f, 0.f, 0.25f};
    const std::vector<float> mean = {0.485f, 0.456f, 0.406f};
    const std::vector<float> stddev = {0.229f, 0.224f, 0.225f};
    Tensor4 out = normalize_image(img, mean, stddev);
    CHECK(out.at(0, 0, 0, 0) == doctest::Approx((0.5f - 0.485f) / 0.229f).epsilon(1e-6));
    CHECK(out.at(0, 0, 0, 1) == doctest::Approx((0.5f - 0.456f) / 0.224f).epsilon(1e-6));
    CHECK(out.at(0, 0, 0, 2) == doctest::Approx((0.5f - 0.406f) / 0.225f).epsilon(1e-6));
    CHECK(out.at(0, 0, 1, 0) == doctest::Approx((1.f - 0.485f) / 0.229f).epsilon(1e-6));
    CHECK(out.at(0, 0, 1, 1) == doctest::Approx((0.f - 0.456f) / 0.224f).epsilon(1e-6));

    CHECK_THROWS_AS(normalize_image(img, {0.5f}, {0.5f}), std::invalid_argument);
    CHECK_THROWS_AS(normalize_image(img, mean, {0.229f, 0.f, 0.225f}), std::invalid_argument);
}
