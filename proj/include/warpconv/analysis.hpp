#pragma once

#include <string>
#include <vector>

#include "warpconv/tensor.hpp"

namespace warpconv {

using DiversityMap = Tensor;  // (H, W), non-negative

// At each pixel: population standard deviation over the G*N offset vectors,
// computed per component and combined as sqrt(var_dx + var_dy). A single
// offset yields zero.
DiversityMap offset_diversity_map(const OffsetField& offsets);

// For each threshold tau: the fraction of (g, n, pixel) estimations whose L1
// distance to the flow vector is <= tau. Non-decreasing in tau.
std::vector<double> flow_distance_cdf(const OffsetField& offsets, const FlowField& flow,
                                      const std::vector<double>& thresholds);

struct OffsetIndex {
  std::size_t g = 0;
  std::size_t n = 0;
  bool operator==(const OffsetIndex&) const = default;
};

// (g, n) indices ordered by ascending mean-over-pixels L1 distance to the
// flow; ties broken by (g, n) lexicographic order.
std::vector<OffsetIndex> sort_by_flow_distance(const OffsetField& offsets,
                                               const FlowField& flow);

struct MaskFlowPoint {
  double mean_l1_to_flow = 0.0;
  double mean_mask = 0.0;
};

// Per (g, n): mean L1 distance to the flow and mean mask value.
std::vector<MaskFlowPoint> mask_flow_scatter(const OffsetField& offsets,
                                             const MaskField& masks,
                                             const FlowField& flow);

// Sample Pearson correlation; requires length >= 2 and non-zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct StatEntry {
  std::string statistic;
  std::string operation;  // the operation that produced the value
  long g = -1;            // -1 when not applicable
  long n = -1;
  double value = 0.0;
};

struct StatsReport {
  std::vector<StatEntry> entries;
};

// Bundles the diagnostics above (plus input-shape provenance) into one
// self-describing report.
StatsReport analyze_offsets(const OffsetField& offsets, const FlowField& flow,
                            const MaskField* masks,
                            const std::vector<double>& thresholds);

}  // namespace warpconv
