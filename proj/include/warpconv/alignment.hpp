#pragma once

#include <optional>

#include "warpconv/dcn.hpp"

namespace warpconv {

// Minimal three-layer offset predictor: two 3x3 conv + leaky-rectifier
// (slope 0.1) layers over the concatenated reference and neighbor features,
// then a 3x3 head emitting 2*G*N offset channels plus, optionally, G*N mask
// channels squashed through the logistic function.
struct PredictorWeights {
  ConvKernel conv1;  // (hidden, 2*C, 3, 3)
  ConvKernel conv2;  // (hidden, hidden, 3, 3)
  ConvKernel head;   // (2*G*N [+ G*N], hidden, 3, 3)
  std::size_t groups = 1;
  std::size_t offsets_per_group = 1;
  bool with_masks = false;
};

// Zero-initialized predictor of the given geometry.
PredictorWeights make_predictor(std::size_t channels, std::size_t groups,
                                std::size_t offsets_per_group, bool with_masks,
                                std::size_t hidden = 16);

struct PredictedOffsets {
  OffsetField offsets;                // (G, N, 2, H, W)
  std::optional<MaskField> masks;     // (G, N, H, W) in [0, 1]
};

PredictedOffsets predict_offsets(const FeatureMap& f_ref, const FeatureMap& f_nbr,
                                 const PredictorWeights& w);

// Aligns the neighbor feature through the decomposed path. The kernel may be
// a spatial (C_out, C, n, n) kernel with n > 1 (taps come from the kernel
// grid and N must equal n^2) or a pointwise (C_out, G*N*(C/G), 1, 1) kernel
// (taps all zero). The reference feature never enters here.
FeatureMap deformable_align(const FeatureMap& f_nbr, const OffsetField& offsets,
                            const Tensor& kernel, const MaskField* masks,
                            std::size_t groups);

// The single-offset special case: warp by the flow, then a 1x1 convolution.
// Bit-identical to decomposed_deform_conv with G = N = 1 and tap (0,0).
FeatureMap flow_align(const FeatureMap& f_nbr, const FlowField& flow,
                      const PointwiseKernel& pw);

// Image-level baseline: warp only, no convolution.
FeatureMap image_align(const FeatureMap& image, const FlowField& flow);

}  // namespace warpconv
