#include "kle/hyperparams.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "kle/error.hpp"
#include "kle/eval.hpp"
#include "kle/format.hpp"

namespace kle {


std::string_view to_string(EdgeSchedule schedule) {
  return schedule == EdgeSchedule::Sequential ? "sequential" : "random";
}

EdgeSchedule parse_edge_schedule(std::string_view s) {
  if (s == "sequential") return EdgeSchedule::Sequential;
  if (s == "random") return EdgeSchedule::Random;
  throw Error(ErrorCode::InvalidInput, "unknown edge schedule '" + std::string(s) + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> edge_order(std::size_t n, EdgeSchedule schedule,
                                                            std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  if (schedule == EdgeSchedule::Random) {
    std::mt19937_64 rng(seed);
    std::shuffle(edges.begin(), edges.end(), rng);
  }
  return edges;
}

ConvergenceCurve entropy_convergence_curve(std::size_t n_vertices, const KernelConfig& cfg,
                                           EdgeSchedule schedule, std::uint64_t seed, double edge_weight) {
  if (n_vertices < 2) throw Error(ErrorCode::InvalidInput, "convergence curves need at least 2 vertices");
  if (cfg.family != KernelFamily::Heat && cfg.family != KernelFamily::Matern) {
    throw Error(ErrorCode::InvalidParams, "convergence curves support heat and Matern kernels");
  }
  cfg.validate();
  ConvergenceCurve curve;
  curve.n_vertices = n_vertices;
  curve.config = cfg;
  curve.schedule = schedule;
  curve.seed = seed;
  curve.param_name = cfg.family == KernelFamily::Heat ? "t" : "kappa";
  curve.param_value = cfg.lengthscale();

  const auto n = static_cast<Eigen::Index>(n_vertices);
  const double edgeless = std::log(static_cast<double>(n_vertices));
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  auto record = [&](std::size_t edges) {
    const SemanticGraph g(SymMatrix(w), NodeKind::Answers);
    const double vne = von_neumann_entropy(build_kernel(g, cfg).matrix);
    curve.points.push_back({edges, vne, vne / edgeless});
  };
  record(0);
  curve.points.front().vne_scaled = 1.0;
  const auto order = edge_order(n_vertices, schedule, seed);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto [i, j] = order[k];
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = edge_weight;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = edge_weight;
    record(k + 1);
  }
  return curve;
}

bool collapses(const ConvergenceCurve& curve, double threshold) {
  const std::size_t total = curve.total_edges();
  for (const auto& p : curve.points) {
    if (2 * p.edge_count > total) break;
    if (p.vne_scaled < threshold) return true;
  }
  return false;
}

double select_lengthscale(std::span<const ConvergenceCurve> curves, double threshold) {
  if (curves.size() < 2) throw Error(ErrorCode::NoCandidates, "need at least two candidate curves");
  std::set<double> all;
  std::set<double> survivors;
  for (const auto& c : curves) {
    if (c.n_vertices != curves.front().n_vertices) {
      throw Error(ErrorCode::InvalidInput, "candidate curves must share the vertex count");
    }
    all.insert(c.param_value);
    if (!collapses(c, threshold)) survivors.insert(c.param_value);
  }
  if (survivors.empty()) return *all.begin();
  return *std::next(survivors.begin(), static_cast<std::ptrdiff_t>((survivors.size() - 1) / 2));
}

KernelConfig grid_search_validation(std::span<const ValidationCandidate> candidates,
                                    const std::vector<bool>& correct) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no candidate configurations");
  if (correct.empty()) throw Error(ErrorCode::EmptyValidation, "validation set is empty");
  const ValidationCandidate* best = nullptr;
  double best_auroc = -1.0;
  for (const auto& c : candidates) {
    if (c.uncertainties.size() != correct.size()) {
      throw Error(ErrorCode::DimensionMismatch, "candidate scores do not match the validation labels");
    }
    const double a = auroc(c.uncertainties, correct);
    if (best == nullptr || a > best_auroc ||
        (a == best_auroc && c.config.lengthscale() < best->config.lengthscale())) {
      best = &c;
      best_auroc = a;
    }
  }
  return best->config;
}

void write_curves_csv(std::ostream& out, std::span<const ConvergenceCurve> curves) {
  out << "n_vertices,schedule,param_name,param_value,edge_count,vne_raw,vne_scaled\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out << c.n_vertices << ',' << to_string(c.schedule) << ',' << c.param_name << ','
          << format_double(c.param_value) << ',' << p.edge_count << ',' << format_double(p.vne_raw) << ','
          << format_double(p.vne_scaled) << '\n';
    }
  }
}

}  // namespace kle
