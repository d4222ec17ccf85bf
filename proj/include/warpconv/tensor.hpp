#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace warpconv {

// Dense row-major tensor of doubles, last dimension fastest. One flat
// buffer, no strides, no views. All reference arithmetic is 64-bit;
// 32-bit storage exists only in the TNSR file format.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t ndim() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_[axis]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  template <typename... Ix>
  double& at(Ix... ix) {
    return data_[offset_of({static_cast<std::size_t>(ix)...})];
  }
  template <typename... Ix>
  double at(Ix... ix) const {
    return data_[offset_of({static_cast<std::size_t>(ix)...})];
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

 private:
  std::size_t offset_of(std::initializer_list<std::size_t> idx) const {
    assert(idx.size() == dims_.size());
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      assert(i < dims_[axis]);
      flat = flat * dims_[axis] + i;
      ++axis;
    }
    return flat;
  }

  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

// Shape conventions used throughout:
//   FeatureMap      (C, H, W)
//   FlowField       (2, H, W)        channel 0 = dx, channel 1 = dy, backward warp
//   Displacement    (2, H, W)        same channel order as FlowField
//   OffsetField     (G, N, 2, H, W)  channel 0 = dx, channel 1 = dy
//   MaskField       (G, N, H, W)     values in [0, 1]
//   ConvKernel      (C_out, C_in, n, n), n odd
//   PointwiseKernel (C_out, G*N*(C_in/G), 1, 1)
using FeatureMap = Tensor;
using FlowField = Tensor;
using Displacement = Tensor;
using OffsetField = Tensor;
using MaskField = Tensor;
using ConvKernel = Tensor;
using PointwiseKernel = Tensor;

Tensor tensor_new(const std::vector<std::size_t>& dims, double fill);

// Serial left-to-right reduction over the flat buffer; this order is the
// reference value for reproducibility checks.
double tensor_sum(const Tensor& t);

}  // namespace warpconv
