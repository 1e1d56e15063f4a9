#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "kle/linalg.hpp"
#include "kle/semantic_graph.hpp"

namespace kle {

enum class KernelFamily { Heat, Matern, SeBlock, Combination };

std::string_view to_string(KernelFamily family);

struct KernelConfig {
  KernelFamily family = KernelFamily::Heat;
  double t = 0.3;
  double nu = 1.0;
  double kappa = 1.0;
  bool normalized_laplacian = false;
  // Combination only: component kernels and their convex weights.
  std::vector<KernelConfig> components;
  std::vector<double> alphas;
  // Combination only: mix the raw components and normalize once afterwards,
  // instead of normalizing each component first.
  bool normalize_after_combining = false;

  static KernelConfig heat(double t = 0.3, bool normalized_laplacian = false);
  static KernelConfig matern(double nu = 1.0, double kappa = 1.0, bool normalized_laplacian = false);
  static KernelConfig se_block();
  // alpha * heat + (1 - alpha) * se_block
  static KernelConfig full(double alpha = 0.5, double t = 0.3, bool normalized_laplacian = false);

  // Throws InvalidLengthscale / InvalidParams / InvalidProbs.
  void validate() const;
  bool needs_clustering() const;
  // t for heat, kappa for Matern; used for tie-breaking and curve labels.
  double lengthscale() const;
  nlohmann::json to_json() const;
};

// Clustering and cluster probabilities, needed by se_block components.
struct ClusterContext {
  const Clustering* clustering = nullptr;
  std::span<const double> probs;
};

struct SemanticKernel {
  DensityMatrix matrix;
  KernelConfig config;
  NodeKind node_kind;
  // Answer indices grouped so that cluster members are contiguous (se_block
  // kernels over answers); empty otherwise.
  std::vector<std::size_t> block_order;
};

// e^{-tL}
SymMatrix heat_kernel(const SymMatrix& laplacian, double t);

// (2nu/kappa^2 I + L)^{-nu}. Underflows for large nu; see matern_kernel_shape.
SymMatrix matern_kernel(const SymMatrix& laplacian, double nu, double kappa);

// (I + kappa^2 L / (2nu))^{-nu}: the Matern kernel times (2nu/kappa^2)^nu.
// Identical after unit-trace normalization and finite for any nu.
SymMatrix matern_kernel_shape(const SymMatrix& laplacian, double nu, double kappa);

// Block-diagonal kernel p(C_i)/m_i J_{m_i} in answer order.
SemanticKernel se_block_kernel(const Clustering& clustering, std::span<const double> cluster_probs);

// diag(p(C_1), ..., p(C_M)): the semantic-entropy kernel over clusters.
SemanticKernel se_cluster_kernel(std::span<const double> cluster_probs);

DensityMatrix combine_kernels(std::span<const DensityMatrix> kernels, std::span<const double> alphas);

SemanticKernel build_kernel(const SemanticGraph& graph, const KernelConfig& cfg,
                            const ClusterContext& clusters = {});

// Shared probability-vector check: nonnegative, sums to 1 within 1e-9.
void validate_probs(std::span<const double> probs);

}  // namespace kle
