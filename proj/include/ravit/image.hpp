#pragma once

#include <string>
#include <vector>

#include "ravit/tensor.hpp"

namespace ravit {

// Binary PPM (P6, maxval 255) to a 1 x H x W x 3 tensor in [0, 1].
Tensor4 read_ppm(const std::string& path);

// Clamps to [0, 1] and writes 8-bit P6. Expects 1 x H x W x 3.
void write_ppm(const std::string& path, const Tensor4& img);

// (x - mean[c]) / std[c], per channel.
Tensor4 normalize_image(const Tensor4& img, const std::vector<float>& mean,
                        const std::vector<float>& stddev);

} // namespace ravit
