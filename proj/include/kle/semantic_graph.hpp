#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kle/linalg.hpp"
#include "kle/nli.hpp"

namespace kle {

enum class NodeKind { Answers, Clusters };
enum class WeightScheme { OneHot, Soft };

std::string_view to_string(NodeKind kind);
std::string_view to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(std::string_view s);

/// One question's sampled generations.
struct AnswerSet {
  std::string question_id;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::vector<std::vector<double>>> token_logprobs;
  std::optional<bool> correct;
  std::optional<std::string> low_temp_answer;

  std::size_t size() const noexcept { return answers.size(); }
  // Throws InvalidInput when the set is empty or logprob counts mismatch.
  void validate() const;
};

class Clustering {
 public:
  // Validates that cluster ids are contiguous from 0 and every id is used.
  explicit Clustering(std::vector<std::size_t> assignment);

  std::size_t num_clusters() const noexcept { return sizes_.size(); }
  std::size_t num_items() const noexcept { return assignment_.size(); }
  const std::vector<std::size_t>& assignment() const noexcept { return assignment_; }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t cluster_of(std::size_t item) const { return assignment_.at(item); }
  std::vector<std::size_t> members(std::size_t cluster) const;

  friend bool operator==(const Clustering&, const Clustering&) = default;

 private:
  std::vector<std::size_t> assignment_;
  std::vector<std::size_t> sizes_;
};

/// Weighted undirected graph: nonnegative symmetric weights, zero diagonal.
class SemanticGraph {
 public:
  SemanticGraph(SymMatrix weights, NodeKind kind);

  const SymMatrix& weights() const noexcept { return w_; }
  NodeKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return w_.size(); }

 private:
  SymMatrix w_;
  NodeKind kind_;
};

struct NliInputOptions {
  // Prepend "Question: {q} Answer: " to both sides of every NLI query.
  bool include_question = true;
};

std::string nli_text(const AnswerSet& answers, std::size_t index, const NliInputOptions& opts);

/// Directed judgments for every ordered pair (i, j), i != j, of one answer
/// set. Collected once and shared by graph construction and clustering.
class PairwiseJudgments {
 public:
  PairwiseJudgments(std::size_t n, std::vector<NliJudgment> offdiagonal_row_major);

  std::size_t size() const noexcept { return n_; }
  const NliJudgment& at(std::size_t i, std::size_t j) const;

 private:
  std::size_t n_;
  std::vector<NliJudgment> judgments_;
};

// The N(N-1) ordered pairs in row-major order, self-pairs excluded.
std::vector<TextPair> answer_pairs(const AnswerSet& answers, const NliInputOptions& opts);

PairwiseJudgments collect_judgments(const AnswerSet& answers, NliProvider& nli,
                                    const NliInputOptions& opts = {});

// f(NLI(s,t), NLI(t,s)) with w = (1, 0.5, 0) applied to both directions.
double edge_weight(const NliJudgment& forward, const NliJudgment& backward, WeightScheme scheme);

bool bidirectionally_entails(const NliJudgment& forward, const NliJudgment& backward);

SemanticGraph weight_matrix_answers(const PairwiseJudgments& judgments, WeightScheme scheme);
SemanticGraph weight_matrix_answers(const AnswerSet& answers, NliProvider& nli, WeightScheme scheme,
                                    const NliInputOptions& opts = {});

SemanticGraph weight_matrix_clusters(const PairwiseJudgments& judgments, const Clustering& clustering,
                                     WeightScheme scheme);
SemanticGraph weight_matrix_clusters(const AnswerSet& answers, const Clustering& clustering,
                                     NliProvider& nli, WeightScheme scheme,
                                     const NliInputOptions& opts = {});

// Greedy clustering: each answer joins the first cluster (in creation order)
// whose first member bidirectionally entails it, else opens a new cluster.
Clustering bidirectional_cluster(const PairwiseJudgments& judgments);
Clustering bidirectional_cluster(const AnswerSet& answers, NliProvider& nli,
                                 const NliInputOptions& opts = {});

// L = D - W, or (D+)^{1/2} L (D+)^{1/2} when normalized.
SymMatrix laplacian(const SemanticGraph& g, bool normalized);

}  // namespace kle
