#include "warpconv/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace warpconv {

double bilinear_sample(const double* plane, std::size_t height, std::size_t width,
                       double y, double x) {
  if (std::isnan(y) || std::isnan(x)) {
    throw std::invalid_argument("bilinear_sample: NaN coordinate");
  }
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  // all four neighbors are out of range (also catches +-inf and values that
  // would overflow the integer cast below)
  if (y <= -1.0 || y >= static_cast<double>(h) || x <= -1.0 || x >= static_cast<double>(w)) {
    return 0.0;
  }
  const long y0 = static_cast<long>(std::floor(y));
  const long x0 = static_cast<long>(std::floor(x));
  const long y1 = y0 + 1;
  const long x1 = x0 + 1;
  const double wy = y - static_cast<double>(y0);
  const double wx = x - static_cast<double>(x0);

  auto pick = [&](long yy, long xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return plane[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
  };

  return (1.0 - wy) * (1.0 - wx) * pick(y0, x0) +
         (1.0 - wy) * wx * pick(y0, x1) +
         wy * (1.0 - wx) * pick(y1, x0) +
         wy * wx * pick(y1, x1);
}

double bilinear_sample(const Tensor& plane, double y, double x) {
  if (plane.ndim() != 2) {
    throw std::invalid_argument("bilinear_sample: plane must be 2D");
  }
  return bilinear_sample(plane.data(), plane.dim(0), plane.dim(1), y, x);
}

namespace detail {

void warp_plane(double* dst, const double* src, std::size_t height, std::size_t width,
                const double* disp_dx, const double* disp_dy, BaseOffset base) {
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t p = i * width + j;
      const double sy = static_cast<double>(i) + base.dy + disp_dy[p];
      const double sx = static_cast<double>(j) + base.dx + disp_dx[p];
      dst[p] = bilinear_sample(src, height, width, sy, sx);
    }
  }
}

}  // namespace detail

FeatureMap warp(const FeatureMap& feature, const Displacement& disp, BaseOffset base) {
  if (feature.ndim() != 3) {
    throw std::invalid_argument("warp: feature must have dims (C, H, W)");
  }
  const std::size_t channels = feature.dim(0);
  const std::size_t height = feature.dim(1);
  const std::size_t width = feature.dim(2);
  if (disp.ndim() != 3 || disp.dim(0) != 2 || disp.dim(1) != height || disp.dim(2) != width) {
    throw std::invalid_argument("warp: displacement dims must be (2, H, W) matching the feature");
  }

  FeatureMap out({channels, height, width});
  const std::size_t plane = height * width;
  const double* dx = disp.data();
  const double* dy = disp.data() + plane;
  for (std::size_t c = 0; c < channels; ++c) {
    detail::warp_plane(out.data() + c * plane, feature.data() + c * plane,
                       height, width, dx, dy, base);
  }
  return out;
}

}  // namespace warpconv
