#pragma once

// Polynomial constants shared by every backend's erf/exp lanes. The
// lanes must execute the same operation sequence over these so their
// results match bitwise; change them together or not at all.

namespace ravit {
namespace kernels {

// exp(x), Cephes-style degree-5 polynomial after 2^k range reduction.
// The high clamp keeps the rounded exponent k at or below 127 so the
// result saturates at exp(88) instead of overflowing to inf.
constexpr float kExpHiClamp = 88.0f;
constexpr float kExpLoClamp = -87.3365478515625f;
constexpr float kLog2E = 1.44269504088896341f;
constexpr float kLn2Hi = 0.693359375f;
constexpr float kLn2Lo = -2.12194440e-4f;
constexpr float kExpC0 = 1.9875691500e-4f;
constexpr float kExpC1 = 1.3981999507e-3f;
constexpr float kExpC2 = 8.3334519073e-3f;
constexpr float kExpC3 = 4.1665795894e-2f;
constexpr float kExpC4 = 1.6666665459e-1f;
constexpr float kExpC5 = 5.0000001201e-1f;

// erf(x) = sign * (1 - poly(t) * exp(-x^2)), t = 1/(1 + p|x|),
// max abs error ~1.5e-7 over the real line
constexpr float kErfP = 0.3275911f;
constexpr float kErfA1 = 0.254829592f;
constexpr float kErfA2 = -0.284496736f;
constexpr float kErfA3 = 1.421413741f;
constexpr float kErfA4 = -1.453152027f;
constexpr float kErfA5 = 1.061405429f;

constexpr float kInvSqrt2 = 0.70710678118654752f;

} // namespace kernels
} // namespace ravit
