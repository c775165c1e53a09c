#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ravit/backbone.hpp"
#include "ravit/detector.hpp"

namespace ravit {

// Sidecar configuration written next to the tensor file as <path>.json.
struct WeightsMeta {
    std::string variant;
    uint64_t seed = 0;
    bool fused = false;
    bool detector = false;
    int num_classes = 0;
    std::vector<float> norm_mean = {0.485f, 0.456f, 0.406f};
    std::vector<float> norm_std = {0.229f, 0.224f, 0.225f};
};

void save_meta(const std::string& path, const WeightsMeta& meta);
WeightsMeta load_meta(const std::string& path);

// Flat binary tensor container: magic RAVW, u32 version, u32 count,
// then per entry u32 name length, name bytes, u32 rank, u32 extents
// and the float32 payload, all little-endian.
void save_tensors(const std::string& path, const std::vector<TensorRef>& refs);

struct LoadedTensor {
    std::string name;
    std::vector<int> extents;
    std::vector<float> data;
};
std::vector<LoadedTensor> load_tensors(const std::string& path);

// Whole-model save/load. Loading rebuilds the skeleton from the sidecar
// (variant, seed, fused form) and overwrites every tensor from the file,
// so the result does not depend on the build-time weight stream.
void save_model(const std::string& path, Model& m);
Model load_model(const std::string& path);

void save_detector(const std::string& path, Detector& det);
Detector load_detector(const std::string& path);

} // namespace ravit
