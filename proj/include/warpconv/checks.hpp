#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpconv/tensor.hpp"

namespace warpconv {

// Seeded random suites behind the equiv-check and grad-check commands.

struct EquivSuiteConfig {
  std::size_t cases = 100;
  std::vector<std::size_t> channels = {2, 4, 8};
  std::vector<std::size_t> groups = {1, 2, 4};
  std::vector<std::size_t> kernels = {1, 3};
  std::vector<std::size_t> sizes = {6, 12};
  double offset_range = 3.0;  // fractional offsets in [-range, range]
  double tol = 1e-10;
  std::uint64_t seed = 1;
};

struct EquivSuiteRow {
  std::size_t channels = 0;
  std::size_t groups = 0;
  std::size_t kernel = 0;
  std::size_t size = 0;
  std::size_t cases = 0;
  double max_abs_diff = 0.0;
  bool pass = false;
};

struct EquivSuiteResult {
  std::vector<EquivSuiteRow> rows;
  double max_abs_diff = 0.0;
  bool pass = false;
};

// Compares deform_conv against the decomposed path on random instances over
// every valid (channels, groups, kernel, size) combination.
EquivSuiteResult run_equivalence_suite(const EquivSuiteConfig& config);

struct GradSuiteConfig {
  std::size_t instances = 20;
  double h = 1e-5;
  double tol = 1e-6;
  std::uint64_t seed = 1;
};

struct GradSuiteRow {
  std::string check;
  std::size_t instances = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradSuiteResult {
  std::vector<GradSuiteRow> rows;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central-difference checks of warp_backward, conv_backward, dcn_backward
// and offset_fidelity_grad on random instances. Displacements stay >= 0.05
// from integer coordinates and fidelity deviations >= 0.05 from {0, t}.
GradSuiteResult run_gradient_suite(const GradSuiteConfig& config);

}  // namespace warpconv
