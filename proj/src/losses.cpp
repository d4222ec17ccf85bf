#include "warpconv/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace warpconv {

namespace {

void check_fidelity_inputs(const OffsetField& offsets, const FlowField& flow,
                           const FidelityConfig& cfg, const char* who) {
  if (offsets.ndim() != 5 || offsets.dim(2) != 2) {
    throw std::invalid_argument(std::string(who) + ": offsets must have dims (G, N, 2, H, W)");
  }
  if (flow.ndim() != 3 || flow.dim(0) != 2 || flow.dim(1) != offsets.dim(3) ||
      flow.dim(2) != offsets.dim(4)) {
    throw std::invalid_argument(std::string(who) +
                                ": flow must have dims (2, H, W) matching the offsets");
  }
  if (cfg.lambda < 0.0 || cfg.t < 0.0) {
    throw std::invalid_argument(std::string(who) + ": lambda and t must be non-negative");
  }
}

}  // namespace

double charbonnier(const Tensor& pred, const Tensor& target, double eps) {
  if (!pred.same_shape(target)) {
    throw std::invalid_argument("charbonnier: shape mismatch");
  }
  if (eps < 0.0) {
    throw std::invalid_argument("charbonnier: eps must be non-negative");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += std::sqrt(d * d + eps * eps);
  }
  return acc;
}

Tensor charbonnier_grad(const Tensor& pred, const Tensor& target, double eps) {
  if (!pred.same_shape(target)) {
    throw std::invalid_argument("charbonnier_grad: shape mismatch");
  }
  Tensor grad(pred.dims());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double denom = std::sqrt(d * d + eps * eps);
    grad[i] = denom > 0.0 ? d / denom : 0.0;
  }
  return grad;
}

double heaviside(double z) { return z > 0.0 ? 1.0 : 0.0; }

double offset_fidelity(const OffsetField& offsets, const FlowField& flow,
                       const FidelityConfig& cfg) {
  check_fidelity_inputs(offsets, flow, cfg, "offset_fidelity");
  const std::size_t sets = offsets.dim(0) * offsets.dim(1);
  const std::size_t frame = flow.size();  // 2 * H * W

  double acc = 0.0;
  for (std::size_t s = 0; s < sets; ++s) {
    const double* off = offsets.data() + s * frame;
    for (std::size_t i = 0; i < frame; ++i) {
      const double dev = std::abs(off[i] - flow[i]);
      acc += heaviside(dev - cfg.t) * dev;
    }
  }
  if (cfg.reduction == Reduction::Mean) {
    acc /= static_cast<double>(sets * frame);
  }
  return cfg.lambda * acc;
}

OffsetField offset_fidelity_grad(const OffsetField& offsets, const FlowField& flow,
                                 const FidelityConfig& cfg) {
  check_fidelity_inputs(offsets, flow, cfg, "offset_fidelity_grad");
  const std::size_t sets = offsets.dim(0) * offsets.dim(1);
  const std::size_t frame = flow.size();
  const double scale = cfg.reduction == Reduction::Mean
                           ? cfg.lambda / static_cast<double>(sets * frame)
                           : cfg.lambda;

  OffsetField grad(offsets.dims());
  for (std::size_t s = 0; s < sets; ++s) {
    const double* off = offsets.data() + s * frame;
    double* g = grad.data() + s * frame;
    for (std::size_t i = 0; i < frame; ++i) {
      const double d = off[i] - flow[i];
      if (std::abs(d) > cfg.t) {
        g[i] = d > 0.0 ? scale : -scale;
      }
    }
  }
  return grad;
}

double total_loss(double data, double fid) { return data + fid; }

}  // namespace warpconv
