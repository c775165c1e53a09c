#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ravit/tensor.hpp"

namespace ravit {

// Multi-branch depthwise unit in training form. The input is split into
// four channel groups: group 1 sees an extra s x s conv, group 2 an
// extra 1xk + kx1 pair, group 3 an extra 3xk + kx3 pair, group 4 passes
// through untouched; a full-width k x k conv runs across all channels
// and batch norm follows the sum.
struct DwKernelSet {
    int k = 0;        // main kernel extent, odd
    int s = 0;        // small kernel extent for group 1
    int channels = 0; // divisible by 4
    int stride = 1;   // 1 or 2

    DwWeights main;     // k x k, all channels
    DwWeights branch1;  // s x s, channels/4
    DwWeights branch2a; // 1 x k
    DwWeights branch2b; // k x 1
    DwWeights branch3a; // 3 x k
    DwWeights branch3b; // k x 3
    BnParams bn;        // all channels

    static int small_kernel(int k);
    static DwKernelSet make(int k, int channels, int stride);
    void validate() const;
};

// Deploy form: a single bias-carrying depthwise conv.
struct FusedDwConv {
    int k = 0;
    int channels = 0;
    int stride = 1;
    DwWeights kernels;
    std::vector<float> bias;
};

// Center-embed a small odd-extent kernel into a k x k grid.
Mat embed_kernel(const Mat& small, int k);

// k x k grid with value at the center tap.
Mat identity_kernel(int k, float value = 1.f);

// Fold batch norm into conv kernels and bias; exact in real arithmetic,
// computed in double.
std::pair<DwWeights, std::vector<float>> fold_bn(const DwWeights& kernels,
                                                 const std::vector<float>& bias,
                                                 const BnParams& bn);

// Collapse the multi-branch unit into one conv; double accumulation,
// truncated to float at the end.
FusedDwConv fuse_repmsdw(const DwKernelSet& set);

// Training-form forward: chunk / branches / concat / add main / BN,
// executed literally.
Tensor4 repmsdw_forward(const Tensor4& x, const DwKernelSet& set);

Tensor4 fused_dw_forward(const Tensor4& x, const FusedDwConv& conv);

struct EquivalenceReport {
    double max_abs_diff = 0.0;
    double tolerance = 0.0;
    int trials = 0;
    bool pass = false;
};

// Runs both forms on seeded random inputs and reports the worst
// elementwise gap. Deterministic for a fixed seed.
EquivalenceReport verify_equivalence(const DwKernelSet& set, int trials,
                                     double tolerance, uint64_t seed = 0x5EEDull);

} // namespace ravit
