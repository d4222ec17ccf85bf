#include "warpconv/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "warpconv/alignment.hpp"
#include "warpconv/checks.hpp"
#include "warpconv/harness.hpp"
#include "warpconv/io.hpp"

namespace warpconv {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct EquivArgs {
  EquivSuiteConfig config;
  std::string report;
};

int run_equiv_check(const EquivArgs& args) {
  const EquivSuiteResult result = run_equivalence_suite(args.config);
  if (result.rows.empty()) {
    std::cerr << "error: no valid configuration (channels must be divisible by groups)\n";
    return 2;
  }
  for (const EquivSuiteRow& row : result.rows) {
    std::cout << "channels=" << row.channels << " groups=" << row.groups
              << " kernel=" << row.kernel << " size=" << row.size << " cases=" << row.cases
              << " max_abs_diff=" << fmt(row.max_abs_diff) << "\n";
  }
  std::cout << "equiv-check max_abs_diff=" << fmt(result.max_abs_diff)
            << " tol=" << fmt(args.config.tol) << " " << (result.pass ? "PASS" : "FAIL") << "\n";
  if (!args.report.empty()) {
    std::ofstream out(args.report);
    if (!out) throw IoError("equiv-check: cannot write report: " + args.report);
    out << "channels,groups,kernel,size,cases,max_abs_diff,pass\n";
    for (const EquivSuiteRow& row : result.rows) {
      out << row.channels << "," << row.groups << "," << row.kernel << "," << row.size << ","
          << row.cases << "," << fmt(row.max_abs_diff) << "," << (row.pass ? 1 : 0) << "\n";
    }
  }
  return result.pass ? 0 : 1;
}

struct GradArgs {
  GradSuiteConfig config;
  std::string report;
};

int run_grad_check(const GradArgs& args) {
  const GradSuiteResult result = run_gradient_suite(args.config);
  for (const GradSuiteRow& row : result.rows) {
    std::cout << row.check << " instances=" << row.instances
              << " max_rel_err=" << fmt(row.max_rel_err) << " "
              << (row.pass ? "PASS" : "FAIL") << "\n";
  }
  std::cout << "grad-check max_rel_err=" << fmt(result.max_rel_err)
            << " tol=" << fmt(args.config.tol) << " " << (result.pass ? "PASS" : "FAIL") << "\n";
  if (!args.report.empty()) {
    std::ofstream out(args.report);
    if (!out) throw IoError("grad-check: cannot write report: " + args.report);
    out << "check,instances,max_rel_err,pass\n";
    for (const GradSuiteRow& row : result.rows) {
      out << row.check << "," << row.instances << "," << fmt(row.max_rel_err) << ","
          << (row.pass ? 1 : 0) << "\n";
    }
  }
  return result.pass ? 0 : 1;
}

struct WarpArgs {
  std::string feature;
  std::string flow;
  std::string out;
};

int run_warp(const WarpArgs& args) {
  const TensorFile feature = read_tensor(args.feature);
  if (feature.tensor.ndim() != 3) {
    throw FormatError("warp: feature tensor must have dims (C, H, W)");
  }
  const FlowField flow = read_flo(args.flow);
  const FeatureMap warped = image_align(feature.tensor, flow);
  write_tensor(warped, args.out);
  std::cout << "warped " << args.feature << " -> " << args.out << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string offsets;
  std::string flow;
  std::string masks;
  std::string out_dir;
};

int run_analyze(const AnalyzeArgs& args) {
  const TensorFile offsets = read_tensor(args.offsets);
  if (offsets.tensor.ndim() != 5 || offsets.tensor.dim(2) != 2) {
    throw FormatError("analyze: offsets tensor must have dims (G, N, 2, H, W)");
  }
  const FlowField flow = read_flo(args.flow);
  std::optional<TensorFile> masks;
  if (!args.masks.empty()) {
    masks = read_tensor(args.masks);
    if (masks->tensor.ndim() != 4) {
      throw FormatError("analyze: masks tensor must have dims (G, N, H, W)");
    }
  }

  const std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};
  const StatsReport report = analyze_offsets(offsets.tensor, flow,
                                             masks ? &masks->tensor : nullptr, thresholds);

  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path dir(args.out_dir);
  write_stats_csv(report, (dir / "stats.csv").string());
  heatmap_pgm(offset_diversity_map(offsets.tensor), (dir / "diversity.pgm").string());
  if (masks) {
    const std::size_t height = masks->tensor.dim(2);
    const std::size_t width = masks->tensor.dim(3);
    const std::size_t sets = masks->tensor.dim(0) * masks->tensor.dim(1);
    Tensor mean_mask({height, width});
    for (std::size_t s = 0; s < sets; ++s) {
      const double* m = masks->tensor.data() + s * height * width;
      for (std::size_t p = 0; p < height * width; ++p) mean_mask[p] += m[p];
    }
    for (std::size_t p = 0; p < mean_mask.size(); ++p) {
      mean_mask[p] /= static_cast<double>(sets);
    }
    heatmap_pgm(mean_mask, (dir / "mask_mean.pgm").string());
  }
  std::cout << "wrote " << (dir / "stats.csv").string() << "\n";
  return 0;
}

struct FitArgs {
  SceneSpec spec;
  std::string flow_kind = "constant";
  std::size_t occlusion = 6;
  std::size_t n_offsets = 1;
  std::size_t groups = 1;
  FidelityConfig cfg;
  FitOptions opt;
  std::string init = "flow";
  std::string report;
};

int run_fit(FitArgs args) {
  if (args.flow_kind == "constant") {
    args.spec.flow_kind = FlowKind::Constant;
  } else if (args.flow_kind == "affine") {
    args.spec.flow_kind = FlowKind::Affine;
  } else if (args.flow_kind == "piecewise") {
    args.spec.flow_kind = FlowKind::Piecewise;
  } else {
    throw CLI::ValidationError("--flow", "expected constant, affine or piecewise");
  }

  if (args.occlusion > 0) {
    if (args.occlusion > args.spec.height || args.occlusion > args.spec.width) {
      throw CLI::ValidationError("--occlusion", "rectangle larger than the scene");
    }
    args.spec.occlusion = OcclusionRect{(args.spec.height - args.occlusion) / 2,
                                        (args.spec.width - args.occlusion) / 2,
                                        args.occlusion, args.occlusion};
  }

  if (args.init == "zeros") {
    args.opt.init = InitKind::Zeros;
  } else if (args.init == "flow") {
    args.opt.init = InitKind::Flow;
  } else if (args.init.rfind("adversarial", 0) == 0) {
    args.opt.init = InitKind::Adversarial;
    const std::size_t colon = args.init.find(':');
    if (colon != std::string::npos) {
      args.opt.adversarial_d = std::stod(args.init.substr(colon + 1));
    }
  } else {
    throw CLI::ValidationError("--init", "expected zeros, flow or adversarial[:d]");
  }
  args.opt.seed = args.spec.seed;

  const ScenePair scene = synth_pair(args.spec);
  const FitReport fit = fit_offsets(scene.f_ref, scene.f_nbr, scene.flow_gt,
                                    args.n_offsets, args.groups, args.cfg, args.opt);
  if (!args.report.empty()) {
    write_fit_csv(fit, args.report);
  }
  std::cout << "fit steps=" << fit.data_loss.size()
            << " final_data_loss=" << fmt(fit.data_loss.back())
            << " final_fidelity_loss=" << fmt(fit.fidelity_loss.back())
            << " final_max_deviation=" << fmt(fit.max_deviation.back())
            << " final_mean_diversity=" << fmt(fit.mean_diversity.back())
            << " converged=" << (fit.converged ? 1 : 0) << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"deformable convolution kernels, warp decomposition and offset analytics"};
  app.require_subcommand(1);
  // long-form help only; grad-check owns --h for the finite-difference step
  app.set_help_flag("--help", "print usage");

  EquivArgs equiv;
  CLI::App* equiv_cmd = app.add_subcommand(
      "equiv-check", "random-suite equivalence of deform_conv and the decomposed path");
  equiv_cmd->set_help_flag("--help", "print usage");
  equiv_cmd->add_option("--cases", equiv.config.cases, "instances per configuration");
  equiv_cmd->add_option("--channels", equiv.config.channels, "channel counts")
      ->delimiter(',');
  equiv_cmd->add_option("--groups", equiv.config.groups, "group counts")->delimiter(',');
  equiv_cmd->add_option("--kernel", equiv.config.kernels, "kernel sizes")->delimiter(',');
  equiv_cmd->add_option("--seed", equiv.config.seed, "PRNG seed");
  equiv_cmd->add_option("--tol", equiv.config.tol, "max abs difference tolerance");
  equiv_cmd->add_option("--report", equiv.report, "CSV report path");

  GradArgs grad;
  CLI::App* grad_cmd =
      app.add_subcommand("grad-check", "finite-difference checks of the backward passes");
  grad_cmd->set_help_flag("--help", "print usage");
  grad_cmd->add_option("--h", grad.config.h, "finite-difference step");
  grad_cmd->add_option("--tol", grad.config.tol, "max relative error tolerance");
  grad_cmd->add_option("--seed", grad.config.seed, "PRNG seed");
  grad_cmd->add_option("--report", grad.report, "CSV report path");

  WarpArgs warp_args;
  CLI::App* warp_cmd = app.add_subcommand("warp", "warp a feature tensor by a .flo flow");
  warp_cmd->set_help_flag("--help", "print usage");
  warp_cmd->add_option("--feature", warp_args.feature, "input TNSR (C, H, W)")->required();
  warp_cmd->add_option("--flow", warp_args.flow, "input .flo")->required();
  warp_cmd->add_option("--out", warp_args.out, "output TNSR")->required();

  AnalyzeArgs analyze;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "offset diagnostics: diversity, flow distance, masks");
  analyze_cmd->set_help_flag("--help", "print usage");
  analyze_cmd->add_option("--offsets", analyze.offsets, "offsets TNSR (G, N, 2, H, W)")
      ->required();
  analyze_cmd->add_option("--flow", analyze.flow, "flow .flo")->required();
  analyze_cmd->add_option("--masks", analyze.masks, "masks TNSR (G, N, H, W)");
  analyze_cmd->add_option("--out-dir", analyze.out_dir, "output directory")->required();

  FitArgs fit;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "fit offsets on a synthetic scene by gradient descent");
  fit_cmd->set_help_flag("--help", "print usage");
  fit_cmd->add_option("--height", fit.spec.height, "scene height");
  fit_cmd->add_option("--width", fit.spec.width, "scene width");
  fit_cmd->add_option("--channels", fit.spec.channels, "scene channels");
  fit_cmd->add_option("--flow", fit.flow_kind, "flow kind: constant, affine, piecewise");
  fit_cmd->add_option("--occlusion", fit.occlusion, "occlusion square size, 0 disables");
  fit_cmd->add_option("--seed", fit.spec.seed, "scene seed");
  fit_cmd->add_option("--n", fit.n_offsets, "offsets per group");
  fit_cmd->add_option("--g", fit.groups, "deformable groups");
  fit_cmd->add_option("--lambda", fit.cfg.lambda, "fidelity weight");
  fit_cmd->add_option("--t", fit.cfg.t, "fidelity tolerance band, pixels");
  fit_cmd->add_option("--steps", fit.opt.steps, "gradient-descent steps");
  fit_cmd->add_option("--lr", fit.opt.lr, "learning rate");
  fit_cmd->add_option("--init", fit.init, "offset init: zeros, flow, adversarial[:d]");
  fit_cmd->add_option("--report", fit.report, "CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (equiv_cmd->parsed()) return run_equiv_check(equiv);
    if (grad_cmd->parsed()) return run_grad_check(grad);
    if (warp_cmd->parsed()) return run_warp(warp_args);
    if (analyze_cmd->parsed()) return run_analyze(analyze);
    if (fit_cmd->parsed()) return run_fit(fit);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("warpconv");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace warpconv
