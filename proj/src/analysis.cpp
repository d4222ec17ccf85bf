#include "warpconv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace warpconv {

namespace {

void check_offsets(const OffsetField& offsets, const char* who) {
  if (offsets.ndim() != 5 || offsets.dim(2) != 2) {
    throw std::invalid_argument(std::string(who) + ": offsets must have dims (G, N, 2, H, W)");
  }
}

void check_flow(const OffsetField& offsets, const FlowField& flow, const char* who) {
  if (flow.ndim() != 3 || flow.dim(0) != 2 || flow.dim(1) != offsets.dim(3) ||
      flow.dim(2) != offsets.dim(4)) {
    throw std::invalid_argument(std::string(who) +
                                ": flow must have dims (2, H, W) matching the offsets");
  }
}

// Mean over pixels of |dx - u| + |dy - v| for one (g, n) offset field.
double mean_l1_distance(const OffsetField& offsets, const FlowField& flow,
                        std::size_t g, std::size_t n) {
  const std::size_t height = offsets.dim(3);
  const std::size_t width = offsets.dim(4);
  double acc = 0.0;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      acc += std::abs(offsets.at(g, n, 0, i, j) - flow.at(0, i, j)) +
             std::abs(offsets.at(g, n, 1, i, j) - flow.at(1, i, j));
    }
  }
  return acc / static_cast<double>(height * width);
}

}  // namespace

DiversityMap offset_diversity_map(const OffsetField& offsets) {
  check_offsets(offsets, "offset_diversity_map");
  const std::size_t sets = offsets.dim(0) * offsets.dim(1);
  const std::size_t height = offsets.dim(3);
  const std::size_t width = offsets.dim(4);

  DiversityMap map({height, width});
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double combined = 0.0;
      for (std::size_t comp = 0; comp < 2; ++comp) {
        double mean = 0.0;
        for (std::size_t g = 0; g < offsets.dim(0); ++g) {
          for (std::size_t n = 0; n < offsets.dim(1); ++n) {
            mean += offsets.at(g, n, comp, i, j);
          }
        }
        mean /= static_cast<double>(sets);
        double var = 0.0;
        for (std::size_t g = 0; g < offsets.dim(0); ++g) {
          for (std::size_t n = 0; n < offsets.dim(1); ++n) {
            const double dev = offsets.at(g, n, comp, i, j) - mean;
            var += dev * dev;
          }
        }
        combined += var / static_cast<double>(sets);
      }
      map.at(i, j) = std::sqrt(combined);
    }
  }
  return map;
}

std::vector<double> flow_distance_cdf(const OffsetField& offsets, const FlowField& flow,
                                      const std::vector<double>& thresholds) {
  check_offsets(offsets, "flow_distance_cdf");
  check_flow(offsets, flow, "flow_distance_cdf");
  if (thresholds.empty()) {
    throw std::invalid_argument("flow_distance_cdf: thresholds must be non-empty");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] <= 0.0 || (i > 0 && thresholds[i] < thresholds[i - 1])) {
      throw std::invalid_argument("flow_distance_cdf: thresholds must be ascending and positive");
    }
  }

  const std::size_t height = offsets.dim(3);
  const std::size_t width = offsets.dim(4);
  const std::size_t total = offsets.dim(0) * offsets.dim(1) * height * width;
  std::vector<std::size_t> counts(thresholds.size(), 0);
  for (std::size_t g = 0; g < offsets.dim(0); ++g) {
    for (std::size_t n = 0; n < offsets.dim(1); ++n) {
      for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
          const double d = std::abs(offsets.at(g, n, 0, i, j) - flow.at(0, i, j)) +
                           std::abs(offsets.at(g, n, 1, i, j) - flow.at(1, i, j));
          for (std::size_t k = 0; k < thresholds.size(); ++k) {
            if (d <= thresholds[k]) ++counts[k];
          }
        }
      }
    }
  }

  std::vector<double> fractions(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    fractions[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  }
  return fractions;
}

std::vector<OffsetIndex> sort_by_flow_distance(const OffsetField& offsets,
                                               const FlowField& flow) {
  check_offsets(offsets, "sort_by_flow_distance");
  check_flow(offsets, flow, "sort_by_flow_distance");

  std::vector<std::pair<double, OffsetIndex>> keyed;
  keyed.reserve(offsets.dim(0) * offsets.dim(1));
  for (std::size_t g = 0; g < offsets.dim(0); ++g) {
    for (std::size_t n = 0; n < offsets.dim(1); ++n) {
      keyed.push_back({mean_l1_distance(offsets, flow, g, n), {g, n}});
    }
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<OffsetIndex> order;
  order.reserve(keyed.size());
  for (const auto& [dist, idx] : keyed) order.push_back(idx);
  return order;
}

std::vector<MaskFlowPoint> mask_flow_scatter(const OffsetField& offsets,
                                             const MaskField& masks,
                                             const FlowField& flow) {
  check_offsets(offsets, "mask_flow_scatter");
  check_flow(offsets, flow, "mask_flow_scatter");
  if (masks.ndim() != 4 || masks.dim(0) != offsets.dim(0) || masks.dim(1) != offsets.dim(1) ||
      masks.dim(2) != offsets.dim(3) || masks.dim(3) != offsets.dim(4)) {
    throw std::invalid_argument("mask_flow_scatter: masks must have dims (G, N, H, W)");
  }

  const std::size_t pixels = offsets.dim(3) * offsets.dim(4);
  std::vector<MaskFlowPoint> points;
  points.reserve(offsets.dim(0) * offsets.dim(1));
  for (std::size_t g = 0; g < offsets.dim(0); ++g) {
    for (std::size_t n = 0; n < offsets.dim(1); ++n) {
      MaskFlowPoint pt;
      pt.mean_l1_to_flow = mean_l1_distance(offsets, flow, g, n);
      const double* m = masks.data() + (g * offsets.dim(1) + n) * pixels;
      double acc = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) acc += m[p];
      pt.mean_mask = acc / static_cast<double>(pixels);
      points.push_back(pt);
    }
  }
  return points;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("pearson: need two equal-length vectors of length >= 2");
  }
  const double count = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / count;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / count;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("pearson: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

StatsReport analyze_offsets(const OffsetField& offsets, const FlowField& flow,
                            const MaskField* masks,
                            const std::vector<double>& thresholds) {
  StatsReport report;
  auto add = [&](std::string stat, std::string op, long g, long n, double value) {
    report.entries.push_back({std::move(stat), std::move(op), g, n, value});
  };

  add("offsets_groups", "meta", -1, -1, static_cast<double>(offsets.dim(0)));
  add("offsets_per_group", "meta", -1, -1, static_cast<double>(offsets.dim(1)));
  add("height", "meta", -1, -1, static_cast<double>(offsets.dim(3)));
  add("width", "meta", -1, -1, static_cast<double>(offsets.dim(4)));

  const DiversityMap div = offset_diversity_map(offsets);
  double mean_div = tensor_sum(div) / static_cast<double>(div.size());
  double max_div = 0.0;
  for (std::size_t i = 0; i < div.size(); ++i) max_div = std::max(max_div, div[i]);
  add("mean_diversity", "offset_diversity_map", -1, -1, mean_div);
  add("max_diversity", "offset_diversity_map", -1, -1, max_div);

  const std::vector<double> cdf = flow_distance_cdf(offsets, flow, thresholds);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    add("cdf_threshold_" + std::to_string(k), "meta", -1, -1, thresholds[k]);
    add("cdf_fraction_" + std::to_string(k), "flow_distance_cdf", -1, -1, cdf[k]);
  }

  const auto order = sort_by_flow_distance(offsets, flow);
  for (std::size_t r = 0; r < order.size(); ++r) {
    add("flow_distance_rank", "sort_by_flow_distance",
        static_cast<long>(order[r].g), static_cast<long>(order[r].n),
        static_cast<double>(r));
  }
  for (std::size_t g = 0; g < offsets.dim(0); ++g) {
    for (std::size_t n = 0; n < offsets.dim(1); ++n) {
      add("mean_l1_to_flow", "sort_by_flow_distance", static_cast<long>(g),
          static_cast<long>(n), mean_l1_distance(offsets, flow, g, n));
    }
  }

  if (masks != nullptr) {
    const auto points = mask_flow_scatter(offsets, *masks, flow);
    std::size_t idx = 0;
    std::vector<double> dists;
    std::vector<double> means;
    for (std::size_t g = 0; g < offsets.dim(0); ++g) {
      for (std::size_t n = 0; n < offsets.dim(1); ++n, ++idx) {
        add("mean_mask", "mask_flow_scatter", static_cast<long>(g), static_cast<long>(n),
            points[idx].mean_mask);
        dists.push_back(points[idx].mean_l1_to_flow);
        means.push_back(points[idx].mean_mask);
      }
    }
    if (dists.size() >= 2) {
      const auto spread = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) > *std::min_element(v.begin(), v.end());
      };
      if (spread(dists) && spread(means)) {
        add("mask_distance_pearson", "pearson", -1, -1, pearson(dists, means));
      }
    }
  }
  return report;
}

}  // namespace warpconv
