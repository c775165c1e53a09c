#include "ravit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ravit {

BenchStats summarize_latencies(std::vector<double> latencies_ms) {
    if (latencies_ms.empty())
        throw std::invalid_argument("summarize_latencies: no samples");
    BenchStats st;
    st.iters = static_cast<int>(latencies_ms.size());
    st.latencies_ms = latencies_ms;

    std::vector<double>& sorted = latencies_ms;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted)
        sum += v;
    const size_t n = sorted.size();
    st.mean_ms = sum / static_cast<double>(n);
    st.median_ms = (n % 2) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const size_t p95 = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
    st.p95_ms = sorted[p95];
    return st;
}

namespace {

double timed_pass(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void check_args(const std::function<void()>& fn, int warmup, int iters) {
    if (!fn)
        throw std::invalid_argument("run_bench: no function");
    if (warmup < 0)
        throw std::invalid_argument("run_bench: warmup must not be negative");
    if (iters <= 0)
        throw std::invalid_argument("run_bench: iters must be positive");
}

} // namespace

BenchStats run_bench(const std::function<void()>& fn, int warmup, int iters) {
    check_args(fn, warmup, iters);
    for (int i = 0; i < warmup; ++i)
        fn();
    std::vector<double> lat;
    lat.reserve(static_cast<size_t>(iters));
    for (int i = 0; i < iters; ++i)
        lat.push_back(timed_pass(fn));
    BenchStats st = summarize_latencies(std::move(lat));
    st.warmup = warmup;
    return st;
}

std::pair<BenchStats, BenchStats> run_bench_paired(
    const std::function<void()>& a, const std::function<void()>& b,
    int warmup, int iters) {
    check_args(a, warmup, iters);
    check_args(b, warmup, iters);
    for (int i = 0; i < warmup; ++i) {
        a();
        b();
    }
    std::vector<double> lat_a, lat_b;
    lat_a.reserve(static_cast<size_t>(iters));
    lat_b.reserve(static_cast<size_t>(iters));
    for (int i = 0; i < iters; ++i) {
        lat_a.push_back(timed_pass(a));
        lat_b.push_back(timed_pass(b));
    }
    BenchStats st_a = summarize_latencies(std::move(lat_a));
    BenchStats st_b = summarize_latencies(std::move(lat_b));
    st_a.warmup = warmup;
    st_b.warmup = warmup;
    return {st_a, st_b};
}

} // namespace ravit
