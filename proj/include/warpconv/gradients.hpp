#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "warpconv/dcn.hpp"

namespace warpconv {

struct GradBundle {
  Tensor grad_input;                 // shape of x
  Tensor grad_offsets;               // shape of offsets
  Tensor grad_weights;               // shape of the pointwise kernel
  std::optional<Tensor> grad_masks;  // shape of masks, when a modulated forward was used
};

// Adjoint of warp(). grad_feature scatters each output gradient to the four
// bilinear corners with the forward weights; grad_disp uses the piecewise
// derivative of the bilinear kernel. At integer coordinates the derivative
// takes the left-limit convention (the cell containing coordinate - eps).
std::pair<Tensor, Tensor> warp_backward(const FeatureMap& grad_out,
                                        const FeatureMap& feature,
                                        const Displacement& disp, BaseOffset base = {});

// Adjoints of conv2d with zero padding.
std::pair<Tensor, Tensor> conv_backward(const FeatureMap& grad_out, const FeatureMap& x,
                                        const ConvKernel& kernel);

// Chain rule through the decomposed path: conv_backward into the stacked
// features, then warp_backward per (group, offset) block.
GradBundle dcn_backward(const FeatureMap& grad_out, const FeatureMap& x,
                        const OffsetField& offsets, const std::vector<BaseOffset>& taps,
                        const PointwiseKernel& pw, std::size_t groups,
                        const MaskField* masks = nullptr);

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central differences per coordinate of params, compared against
// analytic_grad with rel err |a-b| / max(|a|, |b|, 1e-8).
FiniteDiffReport finite_diff_check(const std::function<double(const Tensor&)>& forward,
                                   const Tensor& params, const Tensor& analytic_grad,
                                   double h, double tol);

}  // namespace warpconv
