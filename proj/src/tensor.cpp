#include "warpconv/tensor.hpp"

#include <limits>
#include <stdexcept>

namespace warpconv {

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
  if (dims_.empty()) {
    throw std::invalid_argument("tensor: dimension list must be non-empty");
  }
  std::size_t total = 1;
  for (std::size_t d : dims_) {
    if (d == 0) {
      throw std::invalid_argument("tensor: all dimensions must be >= 1");
    }
    if (total > std::numeric_limits<std::size_t>::max() / d) {
      throw std::length_error("tensor: flat length overflows");
    }
    total *= d;
  }
  data_.assign(total, fill);
}

Tensor tensor_new(const std::vector<std::size_t>& dims, double fill) {
  return Tensor(dims, fill);
}

double tensor_sum(const Tensor& t) {
  double acc = 0.0;
  const double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    acc += p[i];
  }
  return acc;
}

}  // namespace warpconv
