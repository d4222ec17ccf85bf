#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "warpconv/alignment.hpp"
#include "warpconv/analysis.hpp"
#include "warpconv/dcn.hpp"
#include "warpconv/gradients.hpp"
#include "warpconv/harness.hpp"
#include "warpconv/io.hpp"
#include "warpconv/losses.hpp"

namespace py = pybind11;
using namespace warpconv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 0) {
    throw std::invalid_argument("expected an array with at least one dimension");
  }
  std::vector<std::size_t> dims(static_cast<std::size_t>(a.ndim()));
  for (py::ssize_t i = 0; i < a.ndim(); ++i) {
    dims[static_cast<std::size_t>(i)] = static_cast<std::size_t>(a.shape(i));
  }
  Tensor t(dims);
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

py::array_t<double> from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  py::array_t<double> a(shape);
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

std::vector<BaseOffset> to_taps(const std::vector<std::pair<int, int>>& taps) {
  std::vector<BaseOffset> out;
  out.reserve(taps.size());
  for (const auto& [dy, dx] : taps) out.push_back({dy, dx});
  return out;
}

std::optional<Tensor> to_masks(const std::optional<Array>& masks) {
  if (!masks) return std::nullopt;
  return to_tensor(*masks);
}

FidelityConfig make_cfg(double lam, double t, bool mean) {
  FidelityConfig cfg;
  cfg.lambda = lam;
  cfg.t = t;
  cfg.reduction = mean ? Reduction::Mean : Reduction::Sum;
  return cfg;
}

SceneSpec make_spec(std::size_t height, std::size_t width, std::size_t channels,
                    const std::string& flow, double flow_mag, std::size_t occlusion,
                    int smooth_passes, std::uint64_t seed) {
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.channels = channels;
  if (flow == "constant") {
    spec.flow_kind = FlowKind::Constant;
  } else if (flow == "affine") {
    spec.flow_kind = FlowKind::Affine;
  } else if (flow == "piecewise") {
    spec.flow_kind = FlowKind::Piecewise;
  } else {
    throw std::invalid_argument("flow must be constant, affine or piecewise");
  }
  spec.flow_mag = flow_mag;
  if (occlusion > 0) {
    if (occlusion > height || occlusion > width) {
      throw std::invalid_argument("occlusion larger than the scene");
    }
    spec.occlusion = OcclusionRect{(height - occlusion) / 2, (width - occlusion) / 2,
                                   occlusion, occlusion};
  }
  spec.smooth_passes = smooth_passes;
  spec.seed = seed;
  return spec;
}

InitKind parse_init(const std::string& init) {
  if (init == "zeros") return InitKind::Zeros;
  if (init == "flow") return InitKind::Flow;
  if (init == "adversarial") return InitKind::Adversarial;
  throw std::invalid_argument("init must be zeros, flow or adversarial");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deformable convolution kernels, warp decomposition and offset analytics";

  // kernels
  m.def("conv2d",
        [](const Array& x, const Array& kernel) {
          return from_tensor(conv2d(to_tensor(x), to_tensor(kernel)));
        },
        py::arg("x"), py::arg("kernel"),
        "Stride-1 cross-correlation with zero padding (n-1)/2.");
  m.def("deform_conv",
        [](const Array& x, const Array& offsets, const Array& kernel, std::size_t groups) {
          return from_tensor(deform_conv(to_tensor(x), to_tensor(offsets),
                                         to_tensor(kernel), groups));
        },
        py::arg("x"), py::arg("offsets"), py::arg("kernel"), py::arg("groups") = 1,
        "Deformable convolution; offsets shaped (G, n*n, 2, H, W), dx first.");
  m.def("modulated_deform_conv",
        [](const Array& x, const Array& offsets, const Array& masks, const Array& kernel,
           std::size_t groups) {
          return from_tensor(modulated_deform_conv(to_tensor(x), to_tensor(offsets),
                                                   to_tensor(masks), to_tensor(kernel),
                                                   groups));
        },
        py::arg("x"), py::arg("offsets"), py::arg("masks"), py::arg("kernel"),
        py::arg("groups") = 1);
  m.def("kernel_to_pointwise",
        [](const Array& kernel, std::size_t groups) {
          return from_tensor(kernel_to_pointwise(to_tensor(kernel), groups));
        },
        py::arg("kernel"), py::arg("groups") = 1,
        "Rearrange an n x n kernel into 1x1 weights over stacked warped features.");
  m.def("decomposed_deform_conv",
        [](const Array& x, const Array& offsets, const std::vector<std::pair<int, int>>& taps,
           const Array& pw, std::size_t groups, const std::optional<Array>& masks) {
          const auto m_opt = to_masks(masks);
          return from_tensor(decomposed_deform_conv(to_tensor(x), to_tensor(offsets),
                                                    to_taps(taps), to_tensor(pw), groups,
                                                    m_opt ? &*m_opt : nullptr));
        },
        py::arg("x"), py::arg("offsets"), py::arg("taps"), py::arg("pw"),
        py::arg("groups") = 1, py::arg("masks") = py::none(),
        "Warp-stack-mix path; taps are (dy, dx) pairs.");
  m.def("kernel_taps",
        [](std::size_t n) {
          std::vector<std::pair<int, int>> out;
          for (const BaseOffset& t : kernel_taps(n)) out.push_back({t.dy, t.dx});
          return out;
        },
        py::arg("n"), "Row-major kernel-grid taps as (dy, dx) pairs.");
  m.def("equivalence_report",
        [](const Array& x, const Array& offsets, const Array& kernel, std::size_t groups,
           double tol) {
          const EquivalenceReport rep =
              equivalence_report(to_tensor(x), to_tensor(offsets), to_tensor(kernel),
                                 groups, tol);
          py::dict out;
          out["max_abs_diff"] = rep.max_abs_diff;
          out["pass"] = rep.pass;
          return out;
        },
        py::arg("x"), py::arg("offsets"), py::arg("kernel"), py::arg("groups") = 1,
        py::arg("tol") = 1e-10);

  // sampling
  m.def("bilinear_sample",
        [](const Array& plane, double y, double x) {
          return bilinear_sample(to_tensor(plane), y, x);
        },
        py::arg("plane"), py::arg("y"), py::arg("x"));
  m.def("warp",
        [](const Array& feature, const Array& disp, const std::pair<int, int>& base) {
          return from_tensor(warp(to_tensor(feature), to_tensor(disp),
                                  BaseOffset{base.first, base.second}));
        },
        py::arg("feature"), py::arg("disp"), py::arg("base") = std::pair<int, int>(0, 0),
        "Backward warp; disp shaped (2, H, W) with dx first, base is (dy, dx).");

  // gradients
  m.def("warp_backward",
        [](const Array& grad_out, const Array& feature, const Array& disp,
           const std::pair<int, int>& base) {
          const auto [gf, gd] = warp_backward(to_tensor(grad_out), to_tensor(feature),
                                              to_tensor(disp),
                                              BaseOffset{base.first, base.second});
          return py::make_tuple(from_tensor(gf), from_tensor(gd));
        },
        py::arg("grad_out"), py::arg("feature"), py::arg("disp"),
        py::arg("base") = std::pair<int, int>(0, 0));
  m.def("conv_backward",
        [](const Array& grad_out, const Array& x, const Array& kernel) {
          const auto [gx, gk] =
              conv_backward(to_tensor(grad_out), to_tensor(x), to_tensor(kernel));
          return py::make_tuple(from_tensor(gx), from_tensor(gk));
        },
        py::arg("grad_out"), py::arg("x"), py::arg("kernel"));
  m.def("dcn_backward",
        [](const Array& grad_out, const Array& x, const Array& offsets,
           const std::vector<std::pair<int, int>>& taps, const Array& pw,
           std::size_t groups, const std::optional<Array>& masks) {
          const auto m_opt = to_masks(masks);
          const GradBundle b =
              dcn_backward(to_tensor(grad_out), to_tensor(x), to_tensor(offsets),
                           to_taps(taps), to_tensor(pw), groups, m_opt ? &*m_opt : nullptr);
          py::dict out;
          out["grad_input"] = from_tensor(b.grad_input);
          out["grad_offsets"] = from_tensor(b.grad_offsets);
          out["grad_weights"] = from_tensor(b.grad_weights);
          out["grad_masks"] = b.grad_masks ? py::object(from_tensor(*b.grad_masks))
                                           : py::object(py::none());
          return out;
        },
        py::arg("grad_out"), py::arg("x"), py::arg("offsets"), py::arg("taps"),
        py::arg("pw"), py::arg("groups") = 1, py::arg("masks") = py::none());

  // losses
  m.def("charbonnier",
        [](const Array& pred, const Array& target, double eps) {
          return charbonnier(to_tensor(pred), to_tensor(target), eps);
        },
        py::arg("pred"), py::arg("target"), py::arg("eps") = 1e-3);
  m.def("charbonnier_grad",
        [](const Array& pred, const Array& target, double eps) {
          return from_tensor(charbonnier_grad(to_tensor(pred), to_tensor(target), eps));
        },
        py::arg("pred"), py::arg("target"), py::arg("eps") = 1e-3);
  m.def("heaviside", &heaviside, py::arg("z"));
  m.def("offset_fidelity",
        [](const Array& offsets, const Array& flow, double lam, double t, bool mean) {
          return offset_fidelity(to_tensor(offsets), to_tensor(flow),
                                 make_cfg(lam, t, mean));
        },
        py::arg("offsets"), py::arg("flow"), py::arg("lam") = 1.0, py::arg("t") = 2.0,
        py::arg("mean") = false,
        "Thresholded L1 penalty tying offsets to the flow, gated per component.");
  m.def("offset_fidelity_grad",
        [](const Array& offsets, const Array& flow, double lam, double t, bool mean) {
          return from_tensor(offset_fidelity_grad(to_tensor(offsets), to_tensor(flow),
                                                  make_cfg(lam, t, mean)));
        },
        py::arg("offsets"), py::arg("flow"), py::arg("lam") = 1.0, py::arg("t") = 2.0,
        py::arg("mean") = false);
  m.def("total_loss", &total_loss, py::arg("data"), py::arg("fid"));

  // alignment
  m.def("predict_offsets",
        [](const Array& f_ref, const Array& f_nbr, const Array& conv1, const Array& conv2,
           const Array& head, std::size_t groups, std::size_t offsets_per_group,
           bool with_masks) {
          PredictorWeights w;
          w.conv1 = to_tensor(conv1);
          w.conv2 = to_tensor(conv2);
          w.head = to_tensor(head);
          w.groups = groups;
          w.offsets_per_group = offsets_per_group;
          w.with_masks = with_masks;
          const PredictedOffsets out =
              predict_offsets(to_tensor(f_ref), to_tensor(f_nbr), w);
          return py::make_tuple(from_tensor(out.offsets),
                                out.masks ? py::object(from_tensor(*out.masks))
                                          : py::object(py::none()));
        },
        py::arg("f_ref"), py::arg("f_nbr"), py::arg("conv1"), py::arg("conv2"),
        py::arg("head"), py::arg("groups") = 1, py::arg("offsets_per_group") = 1,
        py::arg("with_masks") = false);
  m.def("deformable_align",
        [](const Array& f_nbr, const Array& offsets, const Array& kernel,
           const std::optional<Array>& masks, std::size_t groups) {
          const auto m_opt = to_masks(masks);
          return from_tensor(deformable_align(to_tensor(f_nbr), to_tensor(offsets),
                                              to_tensor(kernel),
                                              m_opt ? &*m_opt : nullptr, groups));
        },
        py::arg("f_nbr"), py::arg("offsets"), py::arg("kernel"),
        py::arg("masks") = py::none(), py::arg("groups") = 1);
  m.def("flow_align",
        [](const Array& f_nbr, const Array& flow, const Array& pw) {
          return from_tensor(flow_align(to_tensor(f_nbr), to_tensor(flow), to_tensor(pw)));
        },
        py::arg("f_nbr"), py::arg("flow"), py::arg("pw"));
  m.def("image_align",
        [](const Array& image, const Array& flow) {
          return from_tensor(image_align(to_tensor(image), to_tensor(flow)));
        },
        py::arg("image"), py::arg("flow"));

  // analytics
  m.def("offset_diversity_map",
        [](const Array& offsets) {
          return from_tensor(offset_diversity_map(to_tensor(offsets)));
        },
        py::arg("offsets"),
        "Pixelwise population std over the G*N offsets, sqrt(var_dx + var_dy).");
  m.def("flow_distance_cdf",
        [](const Array& offsets, const Array& flow, const std::vector<double>& thresholds) {
          return flow_distance_cdf(to_tensor(offsets), to_tensor(flow), thresholds);
        },
        py::arg("offsets"), py::arg("flow"), py::arg("thresholds"));
  m.def("sort_by_flow_distance",
        [](const Array& offsets, const Array& flow) {
          std::vector<std::pair<std::size_t, std::size_t>> out;
          for (const OffsetIndex& i : sort_by_flow_distance(to_tensor(offsets),
                                                            to_tensor(flow))) {
            out.push_back({i.g, i.n});
          }
          return out;
        },
        py::arg("offsets"), py::arg("flow"));
  m.def("mask_flow_scatter",
        [](const Array& offsets, const Array& masks, const Array& flow) {
          std::vector<std::pair<double, double>> out;
          for (const MaskFlowPoint& p : mask_flow_scatter(to_tensor(offsets),
                                                          to_tensor(masks),
                                                          to_tensor(flow))) {
            out.push_back({p.mean_l1_to_flow, p.mean_mask});
          }
          return out;
        },
        py::arg("offsets"), py::arg("masks"), py::arg("flow"));
  m.def("pearson", &pearson, py::arg("xs"), py::arg("ys"));

  // harness
  m.def("synth_pair",
        [](std::size_t height, std::size_t width, std::size_t channels,
           const std::string& flow, double flow_mag, std::size_t occlusion,
           int smooth_passes, std::uint64_t seed) {
          const ScenePair s = synth_pair(make_spec(height, width, channels, flow, flow_mag,
                                                   occlusion, smooth_passes, seed));
          return py::make_tuple(from_tensor(s.f_ref), from_tensor(s.f_nbr),
                                from_tensor(s.flow_gt));
        },
        py::arg("height") = 16, py::arg("width") = 16, py::arg("channels") = 4,
        py::arg("flow") = "constant", py::arg("flow_mag") = 3.0, py::arg("occlusion") = 6,
        py::arg("smooth_passes") = 3, py::arg("seed") = 0,
        "Deterministic synthetic (reference, neighbor, flow) triple.");
  m.def("fit_offsets",
        [](const Array& f_ref, const Array& f_nbr, const Array& flow_gt,
           std::size_t n_offsets, std::size_t groups, double lam, double t,
           std::size_t steps, double lr, const std::string& init, double adversarial_d,
           double init_jitter, std::uint64_t seed) {
          FitOptions opt;
          opt.steps = steps;
          opt.lr = lr;
          opt.init = parse_init(init);
          opt.adversarial_d = adversarial_d;
          opt.init_jitter = init_jitter;
          opt.seed = seed;
          const FitReport r =
              fit_offsets(to_tensor(f_ref), to_tensor(f_nbr), to_tensor(flow_gt),
                          n_offsets, groups, make_cfg(lam, t, false), opt);
          py::dict out;
          out["data_loss"] = r.data_loss;
          out["fidelity_loss"] = r.fidelity_loss;
          out["max_deviation"] = r.max_deviation;
          out["mean_diversity"] = r.mean_diversity;
          out["final_offsets"] = from_tensor(r.final_offsets);
          out["converged"] = r.converged;
          return out;
        },
        py::arg("f_ref"), py::arg("f_nbr"), py::arg("flow_gt"), py::arg("n_offsets") = 1,
        py::arg("groups") = 1, py::arg("lam") = 1.0, py::arg("t") = 2.0,
        py::arg("steps") = 500, py::arg("lr") = 0.1, py::arg("init") = "flow",
        py::arg("adversarial_d") = 10.0, py::arg("init_jitter") = 0.0, py::arg("seed") = 0,
        "Gradient descent over offsets and pointwise weights; returns the traces.");
  m.def("diversity_sweep",
        [](std::size_t height, std::size_t width, std::size_t channels,
           const std::string& flow, double flow_mag, std::size_t occlusion,
           int smooth_passes, const std::vector<std::size_t>& ns, std::size_t groups,
           std::size_t steps, double lr, const std::vector<std::uint64_t>& seeds) {
          const SweepTable t =
              diversity_sweep(make_spec(height, width, channels, flow, flow_mag, occlusion,
                                        smooth_passes, 0),
                              ns, groups, FidelityConfig{}, steps, lr, seeds);
          py::list rows;
          for (const SweepRow& r : t.rows) {
            py::dict row;
            row["n"] = r.n_offsets;
            row["mean_final_data_loss"] = r.mean_final_data_loss;
            row["mean_final_diversity"] = r.mean_final_diversity;
            rows.append(row);
          }
          py::dict out;
          out["rows"] = rows;
          out["diversity_loss_pearson"] =
              t.diversity_loss_pearson ? py::object(py::float_(*t.diversity_loss_pearson))
                                       : py::object(py::none());
          return out;
        },
        py::arg("height") = 16, py::arg("width") = 16, py::arg("channels") = 4,
        py::arg("flow") = "constant", py::arg("flow_mag") = 3.0, py::arg("occlusion") = 6,
        py::arg("smooth_passes") = 3, py::arg("ns") = std::vector<std::size_t>{1, 5},
        py::arg("groups") = 1, py::arg("steps") = 500, py::arg("lr") = 0.1,
        py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3, 4, 5});

  // file formats
  m.def("read_flo",
        [](const std::string& path) { return from_tensor(read_flo(path)); },
        py::arg("path"));
  m.def("write_flo",
        [](const Array& flow, const std::string& path) {
          write_flo(to_tensor(flow), path);
        },
        py::arg("flow"), py::arg("path"));
  m.def("read_tensor",
        [](const std::string& path) {
          const TensorFile f = read_tensor(path);
          return py::make_tuple(from_tensor(f.tensor),
                                f.dtype == TensorDType::Float32 ? "f32" : "f64");
        },
        py::arg("path"), "Returns (array, dtype) with dtype 'f32' or 'f64'.");
  m.def("write_tensor",
        [](const Array& t, const std::string& path, const std::string& dtype) {
          if (dtype != "f32" && dtype != "f64") {
            throw std::invalid_argument("dtype must be 'f32' or 'f64'");
          }
          write_tensor(to_tensor(t), path,
                       dtype == "f32" ? TensorDType::Float32 : TensorDType::Float64);
        },
        py::arg("t"), py::arg("path"), py::arg("dtype") = "f64");
  m.def("heatmap_pgm",
        [](const Array& map, const std::string& path) { heatmap_pgm(to_tensor(map), path); },
        py::arg("map"), py::arg("path"));
}
