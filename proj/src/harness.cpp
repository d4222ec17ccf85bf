#include "warpconv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "warpconv/analysis.hpp"
#include "warpconv/dcn.hpp"
#include "warpconv/gradients.hpp"
#include "warpconv/rng.hpp"

namespace warpconv {

namespace {

// Initial offset spread used by diversity_sweep to break the symmetry
// between the N per-group offsets.
constexpr double kSweepInitJitter = 1.5;

FlowField make_flow(const SceneSpec& spec) {
  const std::size_t height = spec.height;
  const std::size_t width = spec.width;
  FlowField flow({2, height, width});
  const double mag = spec.flow_mag;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double dx = 0.0;
      double dy = 0.0;
      switch (spec.flow_kind) {
        case FlowKind::Constant:
          dx = mag;
          break;
        case FlowKind::Affine: {
          // gentle zoom about the center, max component = mag at the borders
          const double cy = 0.5 * static_cast<double>(height - 1);
          const double cx = 0.5 * static_cast<double>(width - 1);
          dx = cx > 0.0 ? mag * (static_cast<double>(j) - cx) / cx : 0.0;
          dy = cy > 0.0 ? mag * (static_cast<double>(i) - cy) / cy : 0.0;
          break;
        }
        case FlowKind::Piecewise:
          dx = j < width / 2 ? mag : -mag;
          break;
      }
      flow.at(0, i, j) = dx;
      flow.at(1, i, j) = dy;
    }
  }
  return flow;
}

// 3x3 binomial blur with replicate borders.
void smooth_plane(double* plane, std::size_t height, std::size_t width) {
  static const double kWeights[3] = {0.25, 0.5, 0.25};
  std::vector<double> tmp(height * width);
  auto clamp = [](long v, long lo, long hi) { return std::max(lo, std::min(v, hi)); };
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int a = -1; a <= 1; ++a) {
        const long ii = clamp(static_cast<long>(i) + a, 0, static_cast<long>(height) - 1);
        for (int b = -1; b <= 1; ++b) {
          const long jj = clamp(static_cast<long>(j) + b, 0, static_cast<long>(width) - 1);
          acc += kWeights[a + 1] * kWeights[b + 1] *
                 plane[static_cast<std::size_t>(ii) * width + static_cast<std::size_t>(jj)];
        }
      }
      tmp[i * width + j] = acc;
    }
  }
  std::copy(tmp.begin(), tmp.end(), plane);
}

}  // namespace

SceneSpec default_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.occlusion = OcclusionRect{5, 5, 6, 6};
  spec.seed = seed;
  return spec;
}

ScenePair synth_pair(const SceneSpec& spec) {
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    throw std::invalid_argument("synth_pair: dimensions must be >= 1");
  }
  if (!std::isfinite(spec.flow_mag)) {
    throw std::invalid_argument("synth_pair: flow magnitude must be finite");
  }
  if (spec.occlusion) {
    const OcclusionRect& r = *spec.occlusion;
    if (r.height == 0 || r.width == 0 || r.top + r.height > spec.height ||
        r.left + r.width > spec.width) {
      throw std::invalid_argument("synth_pair: occlusion rectangle out of bounds");
    }
  }
  if (spec.smooth_passes < 0) {
    throw std::invalid_argument("synth_pair: smooth_passes must be >= 0");
  }

  const std::size_t height = spec.height;
  const std::size_t width = spec.width;
  const std::size_t plane = height * width;

  ScenePair scene;
  scene.flow_gt = make_flow(spec);

  SplitMix64 rng(spec.seed);
  scene.f_ref = FeatureMap({spec.channels, height, width});
  for (std::size_t i = 0; i < scene.f_ref.size(); ++i) {
    scene.f_ref[i] = rng.uniform(-1.0, 1.0);
  }
  for (std::size_t c = 0; c < spec.channels; ++c) {
    for (int pass = 0; pass < spec.smooth_passes; ++pass) {
      smooth_plane(scene.f_ref.data() + c * plane, height, width);
    }
  }

  // f_nbr(q) = f_ref(q - flow(q)), so that backward-warping f_nbr by flow_gt
  // recovers f_ref (exactly, for constant flow). Out-of-frame content is 0.
  scene.f_nbr = FeatureMap({spec.channels, height, width});
  for (std::size_t c = 0; c < spec.channels; ++c) {
    const double* src = scene.f_ref.data() + c * plane;
    double* dst = scene.f_nbr.data() + c * plane;
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const double sy = static_cast<double>(i) - scene.flow_gt.at(1, i, j);
        const double sx = static_cast<double>(j) - scene.flow_gt.at(0, i, j);
        dst[i * width + j] = bilinear_sample(src, height, width, sy, sx);
      }
    }
  }
  if (spec.occlusion) {
    const OcclusionRect& r = *spec.occlusion;
    for (std::size_t c = 0; c < spec.channels; ++c) {
      for (std::size_t i = r.top; i < r.top + r.height; ++i) {
        for (std::size_t j = r.left; j < r.left + r.width; ++j) {
          scene.f_nbr.at(c, i, j) = 0.0;
        }
      }
    }
  }
  return scene;
}

DivergenceError::DivergenceError(std::size_t at_step)
    : std::runtime_error("fit_offsets: non-finite loss at step " + std::to_string(at_step)),
      step(at_step) {}

FitReport fit_offsets(const FeatureMap& f_ref, const FeatureMap& f_nbr,
                      const FlowField& flow_gt, std::size_t n_offsets,
                      std::size_t groups, const FidelityConfig& cfg,
                      const FitOptions& opt) {
  if (f_ref.ndim() != 3 || !f_ref.same_shape(f_nbr)) {
    throw std::invalid_argument("fit_offsets: feature shapes must match");
  }
  const std::size_t channels = f_ref.dim(0);
  const std::size_t height = f_ref.dim(1);
  const std::size_t width = f_ref.dim(2);
  if (flow_gt.ndim() != 3 || flow_gt.dim(0) != 2 || flow_gt.dim(1) != height ||
      flow_gt.dim(2) != width) {
    throw std::invalid_argument("fit_offsets: flow must have dims (2, H, W)");
  }
  if (n_offsets == 0 || groups == 0 || channels % groups != 0) {
    throw std::invalid_argument("fit_offsets: bad N or groups");
  }
  if (opt.steps == 0 || opt.lr <= 0.0) {
    throw std::invalid_argument("fit_offsets: steps must be >= 1 and lr > 0");
  }

  const std::size_t plane = height * width;
  const std::size_t group_channels = channels / groups;

  OffsetField offsets({groups, n_offsets, 2, height, width});
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t k = 0; k < n_offsets; ++k) {
      double* dx = offsets.data() + ((g * n_offsets + k) * 2) * plane;
      double* dy = dx + plane;
      if (opt.init != InitKind::Zeros) {
        std::copy(flow_gt.data(), flow_gt.data() + plane, dx);
        std::copy(flow_gt.data() + plane, flow_gt.data() + 2 * plane, dy);
      }
      if (opt.init == InitKind::Adversarial) {
        for (std::size_t p = 0; p < plane; ++p) dx[p] += opt.adversarial_d;
      }
    }
  }
  if (opt.init_jitter > 0.0) {
    // one constant perturbation vector per (g, k): N candidate flows
    SplitMix64 rng(opt.seed);
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t k = 0; k < n_offsets; ++k) {
        double* dx = offsets.data() + ((g * n_offsets + k) * 2) * plane;
        double* dy = dx + plane;
        const double jx = rng.uniform(-opt.init_jitter, opt.init_jitter);
        const double jy = rng.uniform(-opt.init_jitter, opt.init_jitter);
        for (std::size_t p = 0; p < plane; ++p) {
          dx[p] += jx;
          dy[p] += jy;
        }
      }
    }
  }

  // Averaging kernel: output channel c mixes its own N warped copies equally.
  PointwiseKernel pw({channels, groups * n_offsets * group_channels, 1, 1});
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t g = c / group_channels;
    const std::size_t within = c % group_channels;
    for (std::size_t k = 0; k < n_offsets; ++k) {
      pw.at(c, (g * n_offsets + k) * group_channels + within, 0, 0) =
          1.0 / static_cast<double>(n_offsets);
    }
  }

  const std::vector<BaseOffset> taps(n_offsets, BaseOffset{});
  FitReport report;
  report.data_loss.reserve(opt.steps);
  report.fidelity_loss.reserve(opt.steps);
  report.max_deviation.reserve(opt.steps);
  report.mean_diversity.reserve(opt.steps);

  // The data term is the per-element mean of the Charbonnier penalty. The
  // shared pointwise weights see gradients summed over every pixel, so a
  // sum-reduced term is unstable at the default step size.
  const double data_scale = 1.0 / static_cast<double>(f_ref.size());

  for (std::size_t step = 0; step < opt.steps; ++step) {
    const FeatureMap aligned = decomposed_deform_conv(f_nbr, offsets, taps, pw, groups);
    const double data = data_scale * charbonnier(aligned, f_ref);
    const double fid = offset_fidelity(offsets, flow_gt, cfg);
    if (!std::isfinite(data) || !std::isfinite(fid)) {
      throw DivergenceError(step);
    }

    double max_dev = 0.0;
    const std::size_t sets = groups * n_offsets;
    for (std::size_t s = 0; s < sets; ++s) {
      const double* off = offsets.data() + s * 2 * plane;
      for (std::size_t i = 0; i < 2 * plane; ++i) {
        max_dev = std::max(max_dev, std::abs(off[i] - flow_gt[i]));
      }
    }
    const DiversityMap div = offset_diversity_map(offsets);

    report.data_loss.push_back(data);
    report.fidelity_loss.push_back(fid);
    report.max_deviation.push_back(max_dev);
    report.mean_diversity.push_back(tensor_sum(div) / static_cast<double>(div.size()));

    Tensor gout = charbonnier_grad(aligned, f_ref);
    for (std::size_t i = 0; i < gout.size(); ++i) gout[i] *= data_scale;
    const GradBundle bundle = dcn_backward(gout, f_nbr, offsets, taps, pw, groups);
    const OffsetField fid_grad = offset_fidelity_grad(offsets, flow_gt, cfg);
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      offsets[i] -= opt.lr * (bundle.grad_offsets[i] + fid_grad[i]);
    }
    for (std::size_t i = 0; i < pw.size(); ++i) {
      pw[i] -= opt.lr * bundle.grad_weights[i];
    }
  }

  report.final_offsets = std::move(offsets);
  report.converged = report.data_loss.back() + report.fidelity_loss.back() <=
                     report.data_loss.front() + report.fidelity_loss.front();
  return report;
}

SweepTable diversity_sweep(const SceneSpec& spec, const std::vector<std::size_t>& ns,
                           std::size_t groups, const FidelityConfig& cfg,
                           std::size_t steps, double lr,
                           const std::vector<std::uint64_t>& seeds) {
  if (ns.empty() || seeds.empty()) {
    throw std::invalid_argument("diversity_sweep: ns and seeds must be non-empty");
  }

  // The sweep measures raw data fit: the fidelity term is disabled.
  FidelityConfig sweep_cfg = cfg;
  sweep_cfg.lambda = 0.0;

  SweepTable table;
  for (std::size_t n : ns) {
    double loss_acc = 0.0;
    double div_acc = 0.0;
    for (std::uint64_t seed : seeds) {
      SceneSpec cell = spec;
      cell.seed = seed;
      const ScenePair scene = synth_pair(cell);
      FitOptions opt;
      opt.steps = steps;
      opt.lr = lr;
      opt.init = InitKind::Flow;
      opt.init_jitter = kSweepInitJitter;
      opt.seed = seed;
      const FitReport fit =
          fit_offsets(scene.f_ref, scene.f_nbr, scene.flow_gt, n, groups, sweep_cfg, opt);
      loss_acc += fit.data_loss.back();
      div_acc += fit.mean_diversity.back();
    }
    SweepRow row;
    row.n_offsets = n;
    row.mean_final_data_loss = loss_acc / static_cast<double>(seeds.size());
    row.mean_final_diversity = div_acc / static_cast<double>(seeds.size());
    table.rows.push_back(row);
  }

  if (table.rows.size() >= 2) {
    std::vector<double> divs;
    std::vector<double> neg_losses;
    for (const SweepRow& row : table.rows) {
      divs.push_back(row.mean_final_diversity);
      neg_losses.push_back(-row.mean_final_data_loss);
    }
    const auto varies = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end()) > *std::min_element(v.begin(), v.end());
    };
    if (varies(divs) && varies(neg_losses)) {
      table.diversity_loss_pearson = pearson(divs, neg_losses);
    }
  }
  return table;
}

}  // namespace warpconv
