#include "ravit/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ravit {

namespace {

struct PpmCursor {
    const std::vector<unsigned char>& buf;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("read_ppm: " + what + " (byte " + std::to_string(pos) + ")");
    }
    // whitespace and '#' comments separate header fields
    void skip_separators() {
        while (pos < buf.size()) {
            if (std::isspace(buf[pos])) {
                ++pos;
            } else if (buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n')
                    ++pos;
            } else {
                break;
            }
        }
    }
    int read_int(const char* what) {
        skip_separators();
        if (pos >= buf.size() || !std::isdigit(buf[pos]))
            fail(std::string("expected ") + what);
        long v = 0;
        while (pos < buf.size() && std::isdigit(buf[pos])) {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1 << 24)
                fail(std::string("implausible ") + what);
            ++pos;
        }
        return static_cast<int>(v);
    }
};

} // namespace

Tensor4 read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("read_ppm: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    PpmCursor cur{buf};
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6')
        cur.fail("not a P6 file");
    cur.pos = 2;
    const int w = cur.read_int("width");
    const int h = cur.read_int("height");
    const int maxval = cur.read_int("maxval");
    if (w <= 0 || h <= 0)
        cur.fail("empty image");
    if (maxval != 255)
        cur.fail("unsupported maxval " + std::to_string(maxval));
    if (cur.pos >= buf.size() || !std::isspace(buf[cur.pos]))
        cur.fail("expected single whitespace before pixel data");
    ++cur.pos; // exactly one separator byte, then raw RGB

    const size_t need = static_cast<size_t>(w) * h * 3;
    if (buf.size() - cur.pos < need)
        cur.fail("truncated pixel data, need " + std::to_string(need) + " bytes, have " +
                 std::to_string(buf.size() - cur.pos));

    Tensor4 img(1, h, w, 3);
    for (size_t i = 0; i < need; ++i)
        img.data[i] = static_cast<float>(buf[cur.pos + i]) * (1.f / 255.f);
    return img;
}

void write_ppm(const std::string& path, const Tensor4& img) {
    if (img.n != 1 || img.c != 3)
        throw std::invalid_argument("write_ppm: expected one image with three channels");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        const float v = std::min(1.f, std::max(0.f, img.data[i]));
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.f));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("write_ppm: write failed for " + path);
}

Tensor4 normalize_image(const Tensor4& img, const std::vector<float>& mean,
                        const std::vector<float>& stddev) {
    if (img.c != static_cast<int>(mean.size()) || mean.size() != stddev.size())
        throw std::invalid_argument("normalize_image: channel count mismatch");
    for (float s : stddev)
        if (s == 0.f)
            throw std::invalid_argument("normalize_image: zero stddev");
    Tensor4 out(img.n, img.h, img.w, img.c);
    const size_t pixels = img.pixels();
    for (size_t p = 0; p < pixels; ++p)
        for (int c = 0; c < img.c; ++c)
            out.data[p * img.c + c] =
                (img.data[p * img.c + c] - mean[static_cast<size_t>(c)]) /
                stddev[static_cast<size_t>(c)];
    return out;
}

} // namespace ravit
