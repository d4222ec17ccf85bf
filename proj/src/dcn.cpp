#include "warpconv/dcn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace warpconv {

namespace {

void check_feature(const FeatureMap& x, const char* who) {
  if (x.ndim() != 3) {
    throw std::invalid_argument(std::string(who) + ": feature must have dims (C, H, W)");
  }
}

void check_kernel(const ConvKernel& kernel, const char* who) {
  if (kernel.ndim() != 4 || kernel.dim(2) != kernel.dim(3)) {
    throw std::invalid_argument(std::string(who) + ": kernel must have dims (C_out, C_in, n, n)");
  }
  if (kernel.dim(2) % 2 == 0) {
    throw std::invalid_argument(std::string(who) + ": kernel size must be odd");
  }
}

void check_offsets(const OffsetField& offsets, std::size_t height, std::size_t width,
                   const char* who) {
  if (offsets.ndim() != 5 || offsets.dim(2) != 2 ||
      offsets.dim(3) != height || offsets.dim(4) != width) {
    throw std::invalid_argument(std::string(who) +
                                ": offsets must have dims (G, N, 2, H, W) matching the feature");
  }
}

void check_groups(std::size_t channels, std::size_t groups, const char* who) {
  if (groups == 0 || channels % groups != 0) {
    throw std::invalid_argument(std::string(who) + ": channel count not divisible by groups");
  }
}

}  // namespace

std::vector<BaseOffset> kernel_taps(std::size_t n) {
  const int r = static_cast<int>(n - 1) / 2;
  std::vector<BaseOffset> taps;
  taps.reserve(n * n);
  for (int ky = -r; ky <= r; ++ky) {
    for (int kx = -r; kx <= r; ++kx) {
      taps.push_back({ky, kx});
    }
  }
  return taps;
}

FeatureMap conv2d(const FeatureMap& x, const ConvKernel& kernel) {
  check_feature(x, "conv2d");
  check_kernel(kernel, "conv2d");
  if (kernel.dim(1) != x.dim(0)) {
    throw std::invalid_argument("conv2d: kernel C_in must equal input channels");
  }

  const std::size_t c_out = kernel.dim(0);
  const std::size_t c_in = kernel.dim(1);
  const std::size_t n = kernel.dim(2);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  const long r = static_cast<long>(n - 1) / 2;

  FeatureMap out({c_out, height, width});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double* plane = x.data() + ci * height * width;
          for (std::size_t ky = 0; ky < n; ++ky) {
            const long yy = static_cast<long>(i) + static_cast<long>(ky) - r;
            if (yy < 0 || yy >= static_cast<long>(height)) continue;
            for (std::size_t kx = 0; kx < n; ++kx) {
              const long xx = static_cast<long>(j) + static_cast<long>(kx) - r;
              if (xx < 0 || xx >= static_cast<long>(width)) continue;
              acc += kernel.at(co, ci, ky, kx) *
                     plane[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
            }
          }
        }
        out.at(co, i, j) = acc;
      }
    }
  }
  return out;
}

namespace {

FeatureMap deform_conv_impl(const FeatureMap& x, const OffsetField& offsets,
                            const MaskField* masks, const ConvKernel& kernel,
                            std::size_t groups, const char* who) {
  check_feature(x, who);
  check_kernel(kernel, who);
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  check_groups(channels, groups, who);
  check_offsets(offsets, height, width, who);
  if (kernel.dim(1) != channels) {
    throw std::invalid_argument(std::string(who) + ": kernel C_in must equal input channels");
  }

  const std::size_t n = kernel.dim(2);
  if (offsets.dim(0) != groups) {
    throw std::invalid_argument(std::string(who) + ": offsets G must equal groups");
  }
  if (offsets.dim(1) != n * n) {
    throw std::invalid_argument(std::string(who) + ": offsets N must equal n^2");
  }
  if (masks != nullptr) {
    if (masks->ndim() != 4 || masks->dim(0) != groups || masks->dim(1) != n * n ||
        masks->dim(2) != height || masks->dim(3) != width) {
      throw std::invalid_argument(std::string(who) + ": masks must have dims (G, n^2, H, W)");
    }
    for (std::size_t i = 0; i < masks->size(); ++i) {
      const double m = (*masks)[i];
      if (!(m >= 0.0 && m <= 1.0)) {
        throw std::invalid_argument(std::string(who) + ": mask value outside [0, 1]");
      }
    }
  }

  const std::size_t c_out = kernel.dim(0);
  const std::size_t group_channels = channels / groups;
  const std::size_t taps_count = n * n;
  const std::vector<BaseOffset> taps = kernel_taps(n);

  FeatureMap out({c_out, height, width});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < channels; ++ci) {
          const std::size_t g = ci / group_channels;
          const double* plane = x.data() + ci * height * width;
          for (std::size_t k = 0; k < taps_count; ++k) {
            const double sy = static_cast<double>(i) + taps[k].dy + offsets.at(g, k, 1, i, j);
            const double sx = static_cast<double>(j) + taps[k].dx + offsets.at(g, k, 0, i, j);
            double v = bilinear_sample(plane, height, width, sy, sx);
            if (masks != nullptr) {
              v *= masks->at(g, k, i, j);
            }
            acc += kernel.at(co, ci, k / n, k % n) * v;
          }
        }
        out.at(co, i, j) = acc;
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap deform_conv(const FeatureMap& x, const OffsetField& offsets,
                       const ConvKernel& kernel, std::size_t groups) {
  return deform_conv_impl(x, offsets, nullptr, kernel, groups, "deform_conv");
}

FeatureMap modulated_deform_conv(const FeatureMap& x, const OffsetField& offsets,
                                 const MaskField& masks, const ConvKernel& kernel,
                                 std::size_t groups) {
  return deform_conv_impl(x, offsets, &masks, kernel, groups, "modulated_deform_conv");
}

PointwiseKernel kernel_to_pointwise(const ConvKernel& kernel, std::size_t groups) {
  check_kernel(kernel, "kernel_to_pointwise");
  const std::size_t c_out = kernel.dim(0);
  const std::size_t c_in = kernel.dim(1);
  const std::size_t n = kernel.dim(2);
  check_groups(c_in, groups, "kernel_to_pointwise");

  const std::size_t group_channels = c_in / groups;
  const std::size_t taps_count = n * n;
  PointwiseKernel pw({c_out, groups * taps_count * group_channels, 1, 1});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t k = 0; k < taps_count; ++k) {
        for (std::size_t c = 0; c < group_channels; ++c) {
          const std::size_t stacked = (g * taps_count + k) * group_channels + c;
          pw.at(co, stacked, 0, 0) = kernel.at(co, g * group_channels + c, k / n, k % n);
        }
      }
    }
  }
  return pw;
}

Tensor warp_stack(const FeatureMap& x, const OffsetField& offsets,
                  const std::vector<BaseOffset>& taps, std::size_t groups,
                  const MaskField* masks) {
  check_feature(x, "warp_stack");
  const std::size_t channels = x.dim(0);
  const std::size_t height = x.dim(1);
  const std::size_t width = x.dim(2);
  check_groups(channels, groups, "warp_stack");
  check_offsets(offsets, height, width, "warp_stack");
  if (offsets.dim(0) != groups) {
    throw std::invalid_argument("warp_stack: offsets G must equal groups");
  }
  const std::size_t n_offsets = offsets.dim(1);
  if (taps.size() != n_offsets) {
    throw std::invalid_argument("warp_stack: taps length must equal offsets N");
  }
  if (masks != nullptr &&
      (masks->ndim() != 4 || masks->dim(0) != groups || masks->dim(1) != n_offsets ||
       masks->dim(2) != height || masks->dim(3) != width)) {
    throw std::invalid_argument("warp_stack: masks must have dims (G, N, H, W)");
  }

  const std::size_t group_channels = channels / groups;
  const std::size_t plane = height * width;
  Tensor stacked({groups * n_offsets * group_channels, height, width});
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t k = 0; k < n_offsets; ++k) {
      // (G, N, 2, H, W) is contiguous per (g, k): dx plane then dy plane.
      const double* dx = offsets.data() + ((g * n_offsets + k) * 2) * plane;
      const double* dy = dx + plane;
      for (std::size_t c = 0; c < group_channels; ++c) {
        const std::size_t ci = g * group_channels + c;
        const std::size_t s = (g * n_offsets + k) * group_channels + c;
        double* dst = stacked.data() + s * plane;
        detail::warp_plane(dst, x.data() + ci * plane, height, width, dx, dy, taps[k]);
        if (masks != nullptr) {
          const double* m = masks->data() + (g * n_offsets + k) * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            dst[p] *= m[p];
          }
        }
      }
    }
  }
  return stacked;
}

FeatureMap decomposed_deform_conv(const FeatureMap& x, const OffsetField& offsets,
                                  const std::vector<BaseOffset>& taps,
                                  const PointwiseKernel& pw, std::size_t groups,
                                  const MaskField* masks) {
  if (masks != nullptr) {
    for (std::size_t i = 0; i < masks->size(); ++i) {
      const double m = (*masks)[i];
      if (!(m >= 0.0 && m <= 1.0)) {
        throw std::invalid_argument("decomposed_deform_conv: mask value outside [0, 1]");
      }
    }
  }
  const Tensor stacked = warp_stack(x, offsets, taps, groups, masks);
  if (pw.ndim() != 4 || pw.dim(2) != 1 || pw.dim(3) != 1) {
    throw std::invalid_argument("decomposed_deform_conv: pointwise kernel must be (C_out, S, 1, 1)");
  }
  if (pw.dim(1) != stacked.dim(0)) {
    throw std::invalid_argument(
        "decomposed_deform_conv: pointwise inner channels must equal G*N*(C/G)");
  }
  return conv2d(stacked, pw);
}

EquivalenceReport equivalence_report(const FeatureMap& x, const OffsetField& offsets,
                                     const ConvKernel& kernel, std::size_t groups,
                                     double tol) {
  const FeatureMap direct = deform_conv(x, offsets, kernel, groups);
  const std::size_t n = kernel.dim(2);
  const FeatureMap decomposed = decomposed_deform_conv(
      x, offsets, kernel_taps(n), kernel_to_pointwise(kernel, groups), groups);

  EquivalenceReport report;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    report.max_abs_diff = std::max(report.max_abs_diff, std::abs(direct[i] - decomposed[i]));
  }
  report.pass = report.max_abs_diff <= tol;
  return report;
}

}  // namespace warpconv
