#pragma once

#include <vector>

#include "ravit/tensor.hpp"

namespace ravit {

// Depthwise conv, one kernel grid per channel, zero padding.
Tensor4 conv_dw(const Tensor4& x, const DwWeights& kernels,
                const std::vector<float>& bias, int stride, Padding pad);

// Pointwise (1x1) conv; weight is Cout x Cin.
Tensor4 conv_pw(const Tensor4& x, const Mat& weight, const std::vector<float>& bias);

Tensor4 batch_norm(const Tensor4& x, const BnParams& bn);
void batch_norm_inplace(Tensor4& x, const BnParams& bn);

Tensor4 gelu(const Tensor4& x);
void gelu_inplace(Tensor4& x);

Mat softmax_rows(const Mat& m);

// N x C matrix of spatial means.
Mat global_avg_pool(const Tensor4& x);

Tensor4 upsample_nearest2x(const Tensor4& x);

Tensor4 add(const Tensor4& a, const Tensor4& b);
void add_inplace(Tensor4& acc, const Tensor4& x);

Tensor4 concat_channels(const std::vector<Tensor4>& parts);
std::vector<Tensor4> chunk_channels(const Tensor4& x, int parts);

// out = a * b + bias with b given row-major K x N; bias may be empty.
Mat mat_mul(const Mat& a, const Mat& b_kn, const std::vector<float>& bias);
Mat transpose(const Mat& m);

} // namespace ravit
