#pragma once

#include "warpconv/tensor.hpp"

namespace warpconv {

// Integer tap of a convolution kernel grid, in [-(n-1)/2, (n-1)/2] each way.
struct BaseOffset {
  int dy = 0;
  int dx = 0;
};

// Bilinear interpolation at real coordinates (y, x) with zero padding:
// any of the four integer neighbors outside [0,H-1]x[0,W-1] contributes 0.
double bilinear_sample(const double* plane, std::size_t height, std::size_t width,
                       double y, double x);

// Same, over a 2D tensor.
double bilinear_sample(const Tensor& plane, double y, double x);

// Spatial warp: output(c,i,j) = feature[c] sampled at
// (i + base.dy + disp[1,i,j], j + base.dx + disp[0,i,j]).
FeatureMap warp(const FeatureMap& feature, const Displacement& disp,
                BaseOffset base = {});

namespace detail {
// Warps one plane into dst. Shared by warp() and the stacked decomposition
// path so the two produce identical bits.
void warp_plane(double* dst, const double* src, std::size_t height, std::size_t width,
                const double* disp_dx, const double* disp_dy, BaseOffset base);
}  // namespace detail

}  // namespace warpconv
