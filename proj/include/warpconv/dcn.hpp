#pragma once

#include <vector>

#include "warpconv/sampling.hpp"
#include "warpconv/tensor.hpp"

namespace warpconv {

// Kernel-grid taps in row-major order: n=3 -> (-1,-1), (-1,0), ..., (1,1).
std::vector<BaseOffset> kernel_taps(std::size_t n);

// Standard cross-correlation, stride 1, zero padding (n-1)/2 so the output
// keeps the input's spatial size. Output dims (C_out, H, W).
FeatureMap conv2d(const FeatureMap& x, const ConvKernel& kernel);

// y(p) = sum_k w(p_k) * x(p + p_k + dp_k), bilinear sampling, zero-pad
// boundary. Offsets dims (G, n^2, 2, H, W); group g's offsets apply to input
// channels [g*C/G, (g+1)*C/G).
FeatureMap deform_conv(const FeatureMap& x, const OffsetField& offsets,
                       const ConvKernel& kernel, std::size_t groups);

// Deformable convolution with per-tap modulation scalars in [0, 1].
FeatureMap modulated_deform_conv(const FeatureMap& x, const OffsetField& offsets,
                                 const MaskField& masks, const ConvKernel& kernel,
                                 std::size_t groups);

// Rearranges an n x n kernel into 1x1 weights over the channel-stacked warped
// features. Stacking order: group-major, then offset index, then channel
// within the group.
PointwiseKernel kernel_to_pointwise(const ConvKernel& kernel, std::size_t groups);

// Warps each group's channels by its N offsets (plus taps) and stacks the
// results into a (G*N*(C/G), H, W) tensor in the order above. With masks the
// warped values are scaled by m[g,k](p) before stacking.
Tensor warp_stack(const FeatureMap& x, const OffsetField& offsets,
                  const std::vector<BaseOffset>& taps, std::size_t groups,
                  const MaskField* masks = nullptr);

// The warp-stack-mix path: warp_stack followed by the 1x1 convolution. For
// generalized N with no kernel-grid meaning, taps are all (0,0).
FeatureMap decomposed_deform_conv(const FeatureMap& x, const OffsetField& offsets,
                                  const std::vector<BaseOffset>& taps,
                                  const PointwiseKernel& pw, std::size_t groups,
                                  const MaskField* masks = nullptr);

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  bool pass = false;
};

// Runs deform_conv and the decomposed path on the same inputs and reports
// the elementwise maximum absolute difference.
EquivalenceReport equivalence_report(const FeatureMap& x, const OffsetField& offsets,
                                     const ConvKernel& kernel, std::size_t groups,
                                     double tol = 1e-10);

}  // namespace warpconv
