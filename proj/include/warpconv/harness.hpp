#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "warpconv/losses.hpp"
#include "warpconv/tensor.hpp"

namespace warpconv {

enum class FlowKind { Constant, Affine, Piecewise };

struct OcclusionRect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct SceneSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 4;
  FlowKind flow_kind = FlowKind::Constant;
  double flow_mag = 3.0;  // pixels
  std::optional<OcclusionRect> occlusion;
  int smooth_passes = 3;  // binomial low-pass passes over the seeded noise
  std::uint64_t seed = 0;
};

// The shipped default: 16x16x4, constant flow of 3 px, centered 6x6 occlusion.
SceneSpec default_scene(std::uint64_t seed);

struct ScenePair {
  FeatureMap f_ref;
  FeatureMap f_nbr;
  FlowField flow_gt;
};

// Deterministic synthetic pair: f_ref is low-pass filtered noise, f_nbr is
// built so that warping it by flow_gt recovers f_ref outside occluded and
// out-of-frame regions. The occlusion rectangle is zeroed in f_nbr.
ScenePair synth_pair(const SceneSpec& spec);

enum class InitKind { Zeros, Flow, Adversarial };

struct FitOptions {
  std::size_t steps = 500;
  double lr = 0.1;
  InitKind init = InitKind::Flow;
  double adversarial_d = 10.0;  // constant (d, 0) added to the flow
  // Uniform per-component perturbation of the initial offsets in
  // [-init_jitter, init_jitter]; breaks the symmetry between the N offsets
  // so that N > 1 can develop diversity. Zero keeps the init exact.
  double init_jitter = 0.0;
  std::uint64_t seed = 0;  // seeds the jitter only
};

struct FitReport {
  std::vector<double> data_loss;       // one entry per step, pre-update
  std::vector<double> fidelity_loss;
  std::vector<double> max_deviation;   // max per-component |offset - flow|
  std::vector<double> mean_diversity;  // mean of the diversity map
  OffsetField final_offsets;
  bool converged = false;  // final total loss <= initial total loss
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(std::size_t at_step);
  std::size_t step;
};

// Gradient descent over the offsets and the pointwise weights of
//   mean charbonnier(decomposed alignment of f_nbr, f_ref) + offset_fidelity.
// The data term is mean-reduced over elements so the default lr is stable;
// the fidelity term follows cfg. Pointwise weights start as the averaging
// kernel (each output channel is the mean of its N warped copies); taps are
// all (0,0).
FitReport fit_offsets(const FeatureMap& f_ref, const FeatureMap& f_nbr,
                      const FlowField& flow_gt, std::size_t n_offsets,
                      std::size_t groups, const FidelityConfig& cfg,
                      const FitOptions& opt);

struct SweepRow {
  std::size_t n_offsets = 0;
  double mean_final_data_loss = 0.0;
  double mean_final_diversity = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  // pearson(mean diversity, -mean data loss) over the rows, when defined
  std::optional<double> diversity_loss_pearson;
};

// Fits each N over each seed on the spec's scene with the fidelity term
// disabled (the sweep measures raw data fit) and jittered flow init, then
// aggregates means per N.
SweepTable diversity_sweep(const SceneSpec& spec, const std::vector<std::size_t>& ns,
                           std::size_t groups, const FidelityConfig& cfg,
                           std::size_t steps, double lr,
                           const std::vector<std::uint64_t>& seeds);

}  // namespace warpconv
