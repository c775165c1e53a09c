#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace ravit {

struct BenchStats {
    int warmup = 0;
    int iters = 0;
    std::vector<double> latencies_ms; // one entry per timed pass, in order
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

// mean, median and p95 over the samples. median is the middle sample,
// or the mean of the two middle samples when the count is even; p95 is
// sorted[ceil(0.95 * n) - 1].
BenchStats summarize_latencies(std::vector<double> latencies_ms);

// Runs fn warmup times untimed, then iters timed passes on the calling
// thread with a monotonic clock around each pass.
BenchStats run_bench(const std::function<void()>& fn, int warmup, int iters);

// Times two workloads under one clock discipline: warms both, then
// alternates single timed passes a, b, a, b so a slow machine phase
// lands on both sides instead of skewing whichever ran later. Each side
// still gets warmup untimed and iters timed passes.
std::pair<BenchStats, BenchStats> run_bench_paired(
    const std::function<void()>& a, const std::function<void()>& b,
    int warmup, int iters);

} // namespace ravit
