#pragma once

#include "warpconv/tensor.hpp"

namespace warpconv {

enum class Reduction {
  Sum,   // literal double sum over pixels
  Mean,  // divided by the number of compared components
};

struct FidelityConfig {
  double lambda = 1.0;  // weight of the fidelity term
  double t = 2.0;       // tolerance band in pixels
  Reduction reduction = Reduction::Sum;
};

// sum over elements of sqrt((pred - target)^2 + eps^2)
double charbonnier(const Tensor& pred, const Tensor& target, double eps = 1e-3);

// d charbonnier / d pred, elementwise (pred - target) / sqrt(diff^2 + eps^2).
Tensor charbonnier_grad(const Tensor& pred, const Tensor& target, double eps = 1e-3);

// 1 if z > 0, else 0 (H(0) = 0, so a deviation of exactly t is unpenalized).
double heaviside(double z);

// Thresholded L1 penalty tying every offset of every group to the same flow,
// applied per displacement component:
//   lambda * sum_{g,n,i,j,comp} H(|off - flow| - t) * |off - flow|
double offset_fidelity(const OffsetField& offsets, const FlowField& flow,
                       const FidelityConfig& cfg);

// Per component: lambda * sign(off - flow) when |off - flow| > t, else 0.
// The Heaviside factor is treated as a constant gate.
OffsetField offset_fidelity_grad(const OffsetField& offsets, const FlowField& flow,
                                 const FidelityConfig& cfg);

// data + fid; lambda is already applied inside offset_fidelity.
double total_loss(double data, double fid);

}  // namespace warpconv
