#include "warpconv/gradients.hpp"

#include <cmath>
#include <stdexcept>

namespace warpconv {

namespace {

// Cell corners and weights for the backward pass. Uses the left-limit cell
// at exact integer coordinates, which scatters identically to the forward
// weights (the shifted weight lands on the shared corner).
struct BilinearCell {
  long y0, x0, y1, x1;
  double wy, wx;
};

BilinearCell backward_cell(double y, double x) {
  BilinearCell c{};
  c.y0 = static_cast<long>(std::floor(y));
  if (static_cast<double>(c.y0) == y) c.y0 -= 1;
  c.x0 = static_cast<long>(std::floor(x));
  if (static_cast<double>(c.x0) == x) c.x0 -= 1;
  c.y1 = c.y0 + 1;
  c.x1 = c.x0 + 1;
  c.wy = y - static_cast<double>(c.y0);
  c.wx = x - static_cast<double>(c.x0);
  return c;
}

inline bool in_bounds(long y, long x, long h, long w) {
  return y >= 0 && y < h && x >= 0 && x < w;
}

// Accumulates the scatter into grad_plane and returns (dvalue/dy, dvalue/dx)
// scaled by g.
void backward_sample(const double* plane, double* grad_plane, std::size_t height,
                     std::size_t width, double y, double x, double g,
                     double& gy, double& gx) {
  if (std::isnan(y) || std::isnan(x)) {
    throw std::invalid_argument("warp_backward: NaN coordinate");
  }
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  // the left-limit cell has no in-range corner (also catches +-inf and
  // values that would overflow the integer cast)
  if (y <= -1.0 || y > static_cast<double>(h) || x <= -1.0 || x > static_cast<double>(w)) {
    return;
  }
  const BilinearCell c = backward_cell(y, x);

  auto pick = [&](long yy, long xx) -> double {
    return in_bounds(yy, xx, h, w)
               ? plane[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)]
               : 0.0;
  };
  auto scatter = [&](long yy, long xx, double v) {
    if (in_bounds(yy, xx, h, w)) {
      grad_plane[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)] += v;
    }
  };

  const double v00 = pick(c.y0, c.x0);
  const double v01 = pick(c.y0, c.x1);
  const double v10 = pick(c.y1, c.x0);
  const double v11 = pick(c.y1, c.x1);

  scatter(c.y0, c.x0, g * (1.0 - c.wy) * (1.0 - c.wx));
  scatter(c.y0, c.x1, g * (1.0 - c.wy) * c.wx);
  scatter(c.y1, c.x0, g * c.wy * (1.0 - c.wx));
  scatter(c.y1, c.x1, g * c.wy * c.wx);

  gy += g * ((v10 - v00) * (1.0 - c.wx) + (v11 - v01) * c.wx);
  gx += g * ((v01 - v00) * (1.0 - c.wy) + (v11 - v10) * c.wy);
}

}  // namespace

std::pair<Tensor, Tensor> warp_backward(const FeatureMap& grad_out,
                                        const FeatureMap& feature,
                                        const Displacement& disp, BaseOffset base) {
  if (feature.ndim() != 3) {
    throw std::invalid_argument("warp_backward: feature must have dims (C, H, W)");
  }
  if (!grad_out.same_shape(feature)) {
    throw std::invalid_argument("warp_backward: grad_out shape must match the feature");
  }
  const std::size_t channels = feature.dim(0);
  const std::size_t height = feature.dim(1);
  const std::size_t width = feature.dim(2);
  if (disp.ndim() != 3 || disp.dim(0) != 2 || disp.dim(1) != height || disp.dim(2) != width) {
    throw std::invalid_argument("warp_backward: displacement dims must be (2, H, W)");
  }

  Tensor grad_feature({channels, height, width});
  Tensor grad_disp({2, height, width});
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t p = i * width + j;
      const double sy = static_cast<double>(i) + base.dy + disp.data()[plane + p];
      const double sx = static_cast<double>(j) + base.dx + disp.data()[p];
      double gy = 0.0;
      double gx = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        backward_sample(feature.data() + c * plane, grad_feature.data() + c * plane,
                        height, width, sy, sx, grad_out.data()[c * plane + p], gy, gx);
      }
      grad_disp.data()[p] = gx;
      grad_disp.data()[plane + p] = gy;
    }
  }
  return {std::move(grad_feature), std::move(grad_disp)};
}

std::pair<Tensor, Tensor> conv_backward(const FeatureMap& grad_out, const FeatureMap& x,
                                        const ConvKernel& kernel) {
  if (x.ndim() != 3 || kernel.ndim() != 4) {
    throw std::invalid_argument("conv_backward: bad input rank");
  }
  const std::size_t c_out = kernel.dim(0);
  const std::size_t c_in = kernel.dim(1);
  const std::size_t n = kernel.dim(2);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  if (kernel.dim(1) != x.dim(0) || kernel.dim(3) != n) {
    throw std::invalid_argument("conv_backward: kernel does not match input");
  }
  if (grad_out.ndim() != 3 || grad_out.dim(0) != c_out || grad_out.dim(1) != height ||
      grad_out.dim(2) != width) {
    throw std::invalid_argument("conv_backward: grad_out shape must be (C_out, H, W)");
  }

  const long r = static_cast<long>(n - 1) / 2;
  Tensor grad_x({c_in, height, width});
  Tensor grad_kernel({c_out, c_in, n, n});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const double g = grad_out.at(co, i, j);
        if (g == 0.0) continue;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t ky = 0; ky < n; ++ky) {
            const long yy = static_cast<long>(i) + static_cast<long>(ky) - r;
            if (yy < 0 || yy >= static_cast<long>(height)) continue;
            for (std::size_t kx = 0; kx < n; ++kx) {
              const long xx = static_cast<long>(j) + static_cast<long>(kx) - r;
              if (xx < 0 || xx >= static_cast<long>(width)) continue;
              grad_x.at(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                  kernel.at(co, ci, ky, kx) * g;
              grad_kernel.at(co, ci, ky, kx) +=
                  x.at(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) * g;
            }
          }
        }
      }
    }
  }
  return {std::move(grad_x), std::move(grad_kernel)};
}

GradBundle dcn_backward(const FeatureMap& grad_out, const FeatureMap& x,
                        const OffsetField& offsets, const std::vector<BaseOffset>& taps,
                        const PointwiseKernel& pw, std::size_t groups,
                        const MaskField* masks) {
  if (x.ndim() != 3 || offsets.ndim() != 5) {
    throw std::invalid_argument("dcn_backward: bad input rank");
  }
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  const std::size_t n_offsets = offsets.dim(1);
  if (groups == 0 || channels % groups != 0) {
    throw std::invalid_argument("dcn_backward: channel count not divisible by groups");
  }
  if (masks != nullptr &&
      (masks->ndim() != 4 || masks->dim(0) != groups || masks->dim(1) != n_offsets ||
       masks->dim(2) != height || masks->dim(3) != width)) {
    throw std::invalid_argument("dcn_backward: masks must have dims (G, N, H, W)");
  }
  const std::size_t group_channels = channels / groups;
  const std::size_t plane = height * width;

  // Unmasked warps are needed both for the pointwise adjoint and for the
  // mask gradient.
  const Tensor warped = warp_stack(x, offsets, taps, groups);
  Tensor stacked = warped;
  if (masks != nullptr) {
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t k = 0; k < n_offsets; ++k) {
        const double* m = masks->data() + (g * n_offsets + k) * plane;
        for (std::size_t c = 0; c < group_channels; ++c) {
          double* dst = stacked.data() + ((g * n_offsets + k) * group_channels + c) * plane;
          for (std::size_t p = 0; p < plane; ++p) dst[p] *= m[p];
        }
      }
    }
  }

  auto [grad_stacked, grad_pw] = conv_backward(grad_out, stacked, pw);

  GradBundle bundle;
  bundle.grad_input = Tensor({channels, height, width});
  bundle.grad_offsets = Tensor(offsets.dims());
  bundle.grad_weights = std::move(grad_pw);
  if (masks != nullptr) {
    bundle.grad_masks = Tensor(masks->dims());
  }

  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t k = 0; k < n_offsets; ++k) {
      const std::size_t block = (g * n_offsets + k) * group_channels;
      const double* m =
          masks != nullptr ? masks->data() + (g * n_offsets + k) * plane : nullptr;
      const double* dx = offsets.data() + ((g * n_offsets + k) * 2) * plane;
      const double* dy = dx + plane;
      double* goff_dx = bundle.grad_offsets.data() + ((g * n_offsets + k) * 2) * plane;
      double* goff_dy = goff_dx + plane;
      double* gmask =
          masks != nullptr ? bundle.grad_masks->data() + (g * n_offsets + k) * plane : nullptr;

      for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t p = i * width + j;
          const double sy = static_cast<double>(i) + taps[k].dy + dy[p];
          const double sx = static_cast<double>(j) + taps[k].dx + dx[p];
          double gy = 0.0;
          double gx = 0.0;
          for (std::size_t c = 0; c < group_channels; ++c) {
            const std::size_t ci = g * group_channels + c;
            double gs = grad_stacked.data()[(block + c) * plane + p];
            if (m != nullptr) {
              gmask[p] += gs * warped.data()[(block + c) * plane + p];
              gs *= m[p];
            }
            backward_sample(x.data() + ci * plane, bundle.grad_input.data() + ci * plane,
                            height, width, sy, sx, gs, gy, gx);
          }
          goff_dy[p] += gy;
          goff_dx[p] += gx;
        }
      }
    }
  }
  return bundle;
}

FiniteDiffReport finite_diff_check(const std::function<double(const Tensor&)>& forward,
                                   const Tensor& params, const Tensor& analytic_grad,
                                   double h, double tol) {
  if (h <= 0.0) {
    throw std::invalid_argument("finite_diff_check: h must be positive");
  }
  if (!params.same_shape(analytic_grad)) {
    throw std::invalid_argument("finite_diff_check: gradient shape must match params");
  }

  FiniteDiffReport report;
  Tensor probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = forward(probe);
    probe[i] = saved - h;
    const double fm = forward(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_check: non-finite forward value");
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    report.max_rel_err = std::max(report.max_rel_err, std::abs(numeric - analytic) / denom);
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace warpconv
