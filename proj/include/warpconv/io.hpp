#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "warpconv/analysis.hpp"
#include "warpconv/harness.hpp"
#include "warpconv/tensor.hpp"

namespace warpconv {

// Malformed or unrecognized file contents.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failed reads/writes (missing file, short write, ...).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Middlebury .flo: float magic 202021.25, int32 width, int32 height, then
// height*width interleaved (u, v) 32-bit floats. u maps to the dx channel,
// v to dy. All little-endian.
FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

// TNSR: "TNSR" | u32 version=1 | u8 dtype (1 = f32, 2 = f64) | u8 ndim |
// ndim x u32 dims | row-major payload. All integers little-endian.
enum class TensorDType : std::uint8_t {
  Float32 = 1,
  Float64 = 2,
};

struct TensorFile {
  Tensor tensor;
  TensorDType dtype = TensorDType::Float64;
};

TensorFile read_tensor(const std::string& path);
void write_tensor(const Tensor& t, const std::string& path,
                  TensorDType dtype = TensorDType::Float64);

// Binary PGM (P5, maxval 255), min-max normalized with round-half-to-even;
// a constant map renders as all zeros.
void heatmap_pgm(const Tensor& map, const std::string& path);

// CSV reports: header row, '.' decimal separator, %.10g values.
void write_stats_csv(const StatsReport& report, const std::string& path);
void write_fit_csv(const FitReport& report, const std::string& path);

}  // namespace warpconv
