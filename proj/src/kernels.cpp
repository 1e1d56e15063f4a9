#include "kle/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "kle/error.hpp"

namespace kle {

namespace {

constexpr double kProbTolerance = 1e-9;

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Heat: return "heat";
    case KernelFamily::Matern: return "matern";
    case KernelFamily::SeBlock: return "se_block";
    case KernelFamily::Combination: return "combination";
  }
  return "heat";
}

KernelConfig KernelConfig::heat(double t, bool normalized_laplacian) {
  KernelConfig c;
  c.family = KernelFamily::Heat;
  c.t = t;
  c.normalized_laplacian = normalized_laplacian;
  return c;
}

KernelConfig KernelConfig::matern(double nu, double kappa, bool normalized_laplacian) {
  KernelConfig c;
  c.family = KernelFamily::Matern;
  c.nu = nu;
  c.kappa = kappa;
  c.normalized_laplacian = normalized_laplacian;
  return c;
}

KernelConfig KernelConfig::se_block() {
  KernelConfig c;
  c.family = KernelFamily::SeBlock;
  return c;
}

KernelConfig KernelConfig::full(double alpha, double t, bool normalized_laplacian) {
  KernelConfig c;
  c.family = KernelFamily::Combination;
  c.components = {heat(t, normalized_laplacian), se_block()};
  c.alphas = {alpha, 1.0 - alpha};
  return c;
}

void KernelConfig::validate() const {
  switch (family) {
    case KernelFamily::Heat:
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw Error(ErrorCode::InvalidLengthscale, "heat kernel needs t > 0");
      }
      break;
    case KernelFamily::Matern:
      if (!(nu > 0.0) || !(kappa > 0.0) || !std::isfinite(nu) || !std::isfinite(kappa)) {
        throw Error(ErrorCode::InvalidParams, "Matern kernel needs nu > 0 and kappa > 0");
      }
      break;
    case KernelFamily::SeBlock:
      break;
    case KernelFamily::Combination:
      if (components.empty() || components.size() != alphas.size()) {
        throw Error(ErrorCode::InvalidParams, "combination needs one weight per component");
      }
      validate_probs(alphas);
      for (const auto& c : components) c.validate();
      break;
  }
}

bool KernelConfig::needs_clustering() const {
  if (family == KernelFamily::SeBlock) return true;
  return std::any_of(components.begin(), components.end(),
                     [](const KernelConfig& c) { return c.needs_clustering(); });
}

double KernelConfig::lengthscale() const {
  switch (family) {
    case KernelFamily::Heat: return t;
    case KernelFamily::Matern: return kappa;
    case KernelFamily::Combination:
      for (const auto& c : components) {
        if (c.family == KernelFamily::Heat || c.family == KernelFamily::Matern) return c.lengthscale();
      }
      return 0.0;
    case KernelFamily::SeBlock: return 0.0;
  }
  return 0.0;
}

nlohmann::json KernelConfig::to_json() const {
  nlohmann::json j;
  j["family"] = to_string(family);
  switch (family) {
    case KernelFamily::Heat:
      j["t"] = t;
      j["normalized_laplacian"] = normalized_laplacian;
      break;
    case KernelFamily::Matern:
      j["nu"] = nu;
      j["kappa"] = kappa;
      j["normalized_laplacian"] = normalized_laplacian;
      break;
    case KernelFamily::SeBlock: break;
    case KernelFamily::Combination:
      j["alphas"] = alphas;
      j["normalize_after_combining"] = normalize_after_combining;
      j["components"] = nlohmann::json::array();
      for (const auto& c : components) j["components"].push_back(c.to_json());
      break;
  }
  return j;
}

void validate_probs(std::span<const double> probs) {
  if (probs.empty()) throw Error(ErrorCode::InvalidProbs, "empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw Error(ErrorCode::InvalidProbs, "probabilities must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << sum;
    throw Error(ErrorCode::InvalidProbs, os.str());
  }
}

SymMatrix heat_kernel(const SymMatrix& laplacian, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidLengthscale, "heat kernel needs t > 0");
  return spectral_map(laplacian, [t](double lambda) { return std::exp(-t * lambda); });
}

SymMatrix matern_kernel(const SymMatrix& laplacian, double nu, double kappa) {
  KernelConfig::matern(nu, kappa).validate();
  const double shift = 2.0 * nu / (kappa * kappa);
  return spectral_map(laplacian, [shift, nu](double lambda) { return std::pow(shift + lambda, -nu); });
}

SymMatrix matern_kernel_shape(const SymMatrix& laplacian, double nu, double kappa) {
  KernelConfig::matern(nu, kappa).validate();
  const double scale = kappa * kappa / (2.0 * nu);
  return spectral_map(laplacian, [scale, nu](double lambda) {
    // log1p keeps the large-nu limit accurate: -nu log(1 + s lambda) -> -kappa^2 lambda / 2
    return std::exp(-nu * std::log1p(scale * lambda));
  });
}

SemanticKernel se_block_kernel(const Clustering& clustering, std::span<const double> cluster_probs) {
  if (cluster_probs.size() != clustering.num_clusters()) {
    throw Error(ErrorCode::InvalidProbs, "one probability per cluster required");
  }
  validate_probs(cluster_probs);
  const auto n = static_cast<Eigen::Index>(clustering.num_items());
  const auto& sizes = clustering.sizes();
  const auto& assign = clustering.assignment();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::size_t ci = assign[static_cast<std::size_t>(i)];
      if (ci == assign[static_cast<std::size_t>(j)]) {
        k(i, j) = cluster_probs[ci] / static_cast<double>(sizes[ci]);
      }
    }
  }
  std::vector<std::size_t> order(assign.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return assign[a] < assign[b]; });
  return SemanticKernel{DensityMatrix(SymMatrix(k)), KernelConfig::se_block(), NodeKind::Answers,
                        std::move(order)};
}

SemanticKernel se_cluster_kernel(std::span<const double> cluster_probs) {
  validate_probs(cluster_probs);
  return SemanticKernel{DensityMatrix(SymMatrix::diagonal(cluster_probs)), KernelConfig::se_block(),
                        NodeKind::Clusters, {}};
}

DensityMatrix combine_kernels(std::span<const DensityMatrix> kernels, std::span<const double> alphas) {
  if (kernels.empty() || kernels.size() != alphas.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight per kernel required");
  }
  validate_probs(alphas);
  const Eigen::Index n = kernels.front().size();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (kernels[i].size() != n) throw Error(ErrorCode::DimensionMismatch, "kernels differ in dimension");
    sum += alphas[i] * kernels[i].matrix().matrix();
  }
  return DensityMatrix(SymMatrix(sum));
}

namespace {

SymMatrix se_matrix(const SemanticGraph& graph, const ClusterContext& clusters) {
  if (clusters.clustering == nullptr) {
    throw Error(ErrorCode::InvalidInput, "se_block kernel needs a clustering and cluster probabilities");
  }
  if (graph.kind() == NodeKind::Clusters) {
    if (static_cast<Eigen::Index>(clusters.probs.size()) != graph.size()) {
      throw Error(ErrorCode::DimensionMismatch, "cluster probabilities do not match the cluster graph");
    }
    return se_cluster_kernel(clusters.probs).matrix.matrix();
  }
  if (static_cast<Eigen::Index>(clusters.clustering->num_items()) != graph.size()) {
    throw Error(ErrorCode::DimensionMismatch, "clustering does not match the answer graph");
  }
  return se_block_kernel(*clusters.clustering, clusters.probs).matrix.matrix();
}

// Unnormalized construction of a single family.
SymMatrix raw_kernel(const SemanticGraph& graph, const KernelConfig& cfg, const ClusterContext& clusters);

DensityMatrix normalized_kernel(const SemanticGraph& graph, const KernelConfig& cfg,
                                const ClusterContext& clusters) {
  switch (cfg.family) {
    case KernelFamily::Heat:
    case KernelFamily::Matern:
      return unit_trace_normalize(raw_kernel(graph, cfg, clusters));
    case KernelFamily::SeBlock:
      // already unit trace; renormalizing would erase the cluster weights
      return DensityMatrix(se_matrix(graph, clusters));
    case KernelFamily::Combination: {
      if (cfg.normalize_after_combining) return unit_trace_normalize(raw_kernel(graph, cfg, clusters));
      std::vector<DensityMatrix> parts;
      parts.reserve(cfg.components.size());
      for (const auto& c : cfg.components) parts.push_back(normalized_kernel(graph, c, clusters));
      return combine_kernels(parts, cfg.alphas);
    }
  }
  throw Error(ErrorCode::InvalidParams, "unknown kernel family");
}

SymMatrix raw_kernel(const SemanticGraph& graph, const KernelConfig& cfg, const ClusterContext& clusters) {
  switch (cfg.family) {
    case KernelFamily::Heat:
      return heat_kernel(laplacian(graph, cfg.normalized_laplacian), cfg.t);
    case KernelFamily::Matern:
      return matern_kernel_shape(laplacian(graph, cfg.normalized_laplacian), cfg.nu, cfg.kappa);
    case KernelFamily::SeBlock:
      return se_matrix(graph, clusters);
    case KernelFamily::Combination: {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(graph.size(), graph.size());
      for (std::size_t i = 0; i < cfg.components.size(); ++i) {
        sum += cfg.alphas[i] * raw_kernel(graph, cfg.components[i], clusters).matrix();
      }
      return SymMatrix(sum);
    }
  }
  throw Error(ErrorCode::InvalidParams, "unknown kernel family");
}

}  // namespace

SemanticKernel build_kernel(const SemanticGraph& graph, const KernelConfig& cfg, const ClusterContext& clusters) {
  cfg.validate();
  DensityMatrix k = normalized_kernel(graph, cfg, clusters);
  std::vector<std::size_t> order;
  if (cfg.needs_clustering() && graph.kind() == NodeKind::Answers && clusters.clustering != nullptr) {
    const auto& assign = clusters.clustering->assignment();
    order.resize(assign.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return assign[a] < assign[b]; });
  }
  return SemanticKernel{std::move(k), cfg, graph.kind(), std::move(order)};
}

}  // namespace kle
