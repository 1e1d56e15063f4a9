#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kle/kernels.hpp"

namespace kle {

enum class EdgeSchedule { Sequential, Random };

std::string_view to_string(EdgeSchedule schedule);
EdgeSchedule parse_edge_schedule(std::string_view s);

struct CurvePoint {
  std::size_t edge_count;
  double vne_raw;
  double vne_scaled;
};

struct ConvergenceCurve {
  std::size_t n_vertices = 0;
  KernelConfig config;
  EdgeSchedule schedule = EdgeSchedule::Sequential;
  std::uint64_t seed = 0;
  std::string param_name;
  double param_value = 0.0;
  std::vector<CurvePoint> points;

  std::size_t total_edges() const noexcept { return n_vertices * (n_vertices - 1) / 2; }
};

// The order in which edges of the complete graph on n vertices are added.
// Sequential fills the adjacencies of vertex 0, then vertex 1, and so on.
std::vector<std::pair<std::size_t, std::size_t>> edge_order(std::size_t n, EdgeSchedule schedule,
                                                            std::uint64_t seed);

/// VNE of the unit-trace kernel on a nested sequence of graphs, from the
/// edgeless graph to the complete graph, one edge at a time. Scaled values
/// divide by the edgeless VNE, ln n.
ConvergenceCurve entropy_convergence_curve(std::size_t n_vertices, const KernelConfig& cfg,
                                           EdgeSchedule schedule, std::uint64_t seed,
                                           double edge_weight = 1.0);

inline constexpr double kDefaultCollapseThreshold = 0.1;

// True when the scaled VNE drops below threshold while at most half of the
// possible edges are present.
bool collapses(const ConvergenceCurve& curve, double threshold = kDefaultCollapseThreshold);

// Lower median of the distinct non-collapsing parameter values; the smallest
// candidate when every curve collapses.
double select_lengthscale(std::span<const ConvergenceCurve> curves,
                          double threshold = kDefaultCollapseThreshold);

struct ValidationCandidate {
  KernelConfig config;
  std::vector<double> uncertainties;
};

// Highest validation AUROC; exact ties go to the smaller lengthscale.
KernelConfig grid_search_validation(std::span<const ValidationCandidate> candidates,
                                    const std::vector<bool>& correct);

void write_curves_csv(std::ostream& out, std::span<const ConvergenceCurve> curves);

}  // namespace kle
