#include "ravit/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace ravit {
namespace kernels {

namespace {

const Backend* lookup(const std::string& name) {
    if (name == "scalar") return &scalar_backend();
#if defined(__AVX2__) || defined(RAVIT_HAVE_AVX2)
    if (name == "avx2") return &avx2_backend();
#endif
#if defined(__AVX512F__) || defined(RAVIT_HAVE_AVX512)
    if (name == "avx512") return &avx512_backend();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
    if (name == "neon") return &neon_backend();
#endif
    return nullptr;
}

const Backend* pick_default() {
#if defined(__aarch64__) || defined(__ARM_NEON)
    return &neon_backend();
#else
#if defined(__AVX512F__) || defined(RAVIT_HAVE_AVX512)
    if (__builtin_cpu_supports("avx512f"))
        return &avx512_backend();
#endif
#if defined(__AVX2__) || defined(RAVIT_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return &avx2_backend();
#endif
#endif
    return &scalar_backend();
}

const Backend*& active_slot() {
    static const Backend* slot = [] {
        if (const char* env = std::getenv("RAVIT_KERNELS")) {
            if (const Backend* b = lookup(env)) return b;
        }
        return pick_default();
    }();
    return slot;
}

} // namespace

const Backend& active() { return *active_slot(); }

std::string set_active(const std::string& name) {
    const Backend* b = lookup(name);
    if (!b)
        throw std::invalid_argument("unknown kernel backend: " + name);
    std::string prev = active_slot()->name;
    active_slot() = b;
    return prev;
}

std::vector<std::string> available_backends() {
    std::vector<std::string> out{"scalar"};
#if defined(__AVX2__) || defined(RAVIT_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        out.push_back("avx2");
#endif
#if defined(__AVX512F__) || defined(RAVIT_HAVE_AVX512)
    if (__builtin_cpu_supports("avx512f"))
        out.push_back("avx512");
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
    out.push_back("neon");
#endif
    return out;
}

} // namespace kernels
} // namespace ravit
