#include "warpconv/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace warpconv {

namespace {

void leaky_relu_inplace(Tensor& t, double slope) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0.0) t[i] *= slope;
  }
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

PredictorWeights make_predictor(std::size_t channels, std::size_t groups,
                                std::size_t offsets_per_group, bool with_masks,
                                std::size_t hidden) {
  const std::size_t gn = groups * offsets_per_group;
  PredictorWeights w;
  w.conv1 = ConvKernel({hidden, 2 * channels, 3, 3});
  w.conv2 = ConvKernel({hidden, hidden, 3, 3});
  w.head = ConvKernel({with_masks ? 3 * gn : 2 * gn, hidden, 3, 3});
  w.groups = groups;
  w.offsets_per_group = offsets_per_group;
  w.with_masks = with_masks;
  return w;
}

PredictedOffsets predict_offsets(const FeatureMap& f_ref, const FeatureMap& f_nbr,
                                 const PredictorWeights& w) {
  if (f_ref.ndim() != 3 || !f_ref.same_shape(f_nbr)) {
    throw std::invalid_argument("predict_offsets: reference and neighbor shapes must match");
  }
  const std::size_t channels = f_ref.dim(0);
  const std::size_t height = f_ref.dim(1);
  const std::size_t width = f_ref.dim(2);
  const std::size_t gn = w.groups * w.offsets_per_group;
  if (w.conv1.ndim() != 4 || w.conv1.dim(1) != 2 * channels) {
    throw std::invalid_argument("predict_offsets: conv1 C_in must equal 2*C");
  }
  const std::size_t head_channels = w.with_masks ? 3 * gn : 2 * gn;
  if (w.head.dim(0) != head_channels) {
    throw std::invalid_argument("predict_offsets: head output channels must be (2+m)*G*N");
  }

  const std::size_t plane = height * width;
  FeatureMap both({2 * channels, height, width});
  std::copy(f_ref.data(), f_ref.data() + f_ref.size(), both.data());
  std::copy(f_nbr.data(), f_nbr.data() + f_nbr.size(), both.data() + f_ref.size());

  FeatureMap h1 = conv2d(both, w.conv1);
  leaky_relu_inplace(h1, 0.1);
  FeatureMap h2 = conv2d(h1, w.conv2);
  leaky_relu_inplace(h2, 0.1);
  FeatureMap head = conv2d(h2, w.head);

  PredictedOffsets out;
  // Head channel layout: offsets first (group-major, then offset index, then
  // dx/dy), then the mask channels.
  out.offsets = OffsetField({w.groups, w.offsets_per_group, 2, height, width});
  std::copy(head.data(), head.data() + 2 * gn * plane, out.offsets.data());
  if (w.with_masks) {
    MaskField masks({w.groups, w.offsets_per_group, height, width});
    const double* raw = head.data() + 2 * gn * plane;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      masks[i] = logistic(raw[i]);
    }
    out.masks = std::move(masks);
  }
  return out;
}

FeatureMap deformable_align(const FeatureMap& f_nbr, const OffsetField& offsets,
                            const Tensor& kernel, const MaskField* masks,
                            std::size_t groups) {
  if (kernel.ndim() != 4) {
    throw std::invalid_argument("deformable_align: kernel must be 4D");
  }
  const std::size_t n = kernel.dim(2);
  if (n != kernel.dim(3)) {
    throw std::invalid_argument("deformable_align: kernel spatial dims must be square");
  }
  if (n > 1) {
    if (offsets.ndim() != 5 || offsets.dim(1) != n * n) {
      throw std::invalid_argument("deformable_align: offsets N must equal n^2 for a spatial kernel");
    }
    return decomposed_deform_conv(f_nbr, offsets, kernel_taps(n),
                                  kernel_to_pointwise(kernel, groups), groups, masks);
  }
  const std::size_t n_offsets = offsets.ndim() == 5 ? offsets.dim(1) : 0;
  return decomposed_deform_conv(f_nbr, offsets,
                                std::vector<BaseOffset>(n_offsets, BaseOffset{}),
                                kernel, groups, masks);
}

FeatureMap flow_align(const FeatureMap& f_nbr, const FlowField& flow,
                      const PointwiseKernel& pw) {
  if (flow.ndim() != 3 || flow.dim(0) != 2) {
    throw std::invalid_argument("flow_align: flow must have dims (2, H, W)");
  }
  OffsetField as_offsets({1, 1, 2, flow.dim(1), flow.dim(2)});
  std::copy(flow.data(), flow.data() + flow.size(), as_offsets.data());
  return decomposed_deform_conv(f_nbr, as_offsets, {BaseOffset{}}, pw, 1);
}

FeatureMap image_align(const FeatureMap& image, const FlowField& flow) {
  return warp(image, flow);
}

}  // namespace warpconv
