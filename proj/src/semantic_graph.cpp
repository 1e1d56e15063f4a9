#include "kle/semantic_graph.hpp"

#include <algorithm>
#include <cmath>

#include "kle/error.hpp"

namespace kle {

namespace {

constexpr std::array<double, 3> kEdgeWeights{1.0, 0.5, 0.0};

double weigh(const NliJudgment& j, WeightScheme scheme) {
  if (scheme == WeightScheme::OneHot) return kEdgeWeights[static_cast<std::size_t>(j.label())];
  double w = 0.0;
  for (std::size_t k = 0; k < 3; ++k) w += kEdgeWeights[k] * j.probs()[k];
  return w;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  return kind == NodeKind::Answers ? "answers" : "clusters";
}

std::string_view to_string(WeightScheme scheme) {
  return scheme == WeightScheme::OneHot ? "one-hot" : "soft";
}

WeightScheme parse_weight_scheme(std::string_view s) {
  if (s == "one-hot" || s == "onehot") return WeightScheme::OneHot;
  if (s == "soft") return WeightScheme::Soft;
  throw Error(ErrorCode::InvalidInput, "unknown weight scheme '" + std::string(s) + "'");
}

void AnswerSet::validate() const {
  if (answers.empty()) throw Error(ErrorCode::InvalidInput, "answer set '" + question_id + "' is empty");
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (canonicalize_text(answers[i]).empty()) {
      throw Error(ErrorCode::InvalidInput,
                  "answer " + std::to_string(i) + " of '" + question_id + "' is blank");
    }
  }
  if (token_logprobs && token_logprobs->size() != answers.size()) {
    throw Error(ErrorCode::InvalidInput, "token_logprobs length does not match answers for '" +
                                             question_id + "'");
  }
}

Clustering::Clustering(std::vector<std::size_t> assignment) : assignment_(std::move(assignment)) {
  if (assignment_.empty()) throw Error(ErrorCode::InvalidInput, "clustering of zero items");
  const std::size_t m = *std::max_element(assignment_.begin(), assignment_.end()) + 1;
  sizes_.assign(m, 0);
  for (auto c : assignment_) ++sizes_[c];
  if (std::find(sizes_.begin(), sizes_.end(), 0u) != sizes_.end()) {
    throw Error(ErrorCode::InvalidInput, "cluster indices must be contiguous from 0");
  }
}

std::vector<std::size_t> Clustering::members(std::size_t cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    if (assignment_[i] == cluster) out.push_back(i);
  }
  return out;
}

SemanticGraph::SemanticGraph(SymMatrix weights, NodeKind kind) : w_(std::move(weights)), kind_(kind) {
  const auto& m = w_.matrix();
  if (!m.allFinite() || (m.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, "graph weights must be finite and nonnegative");
  }
  if (m.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorCode::InvalidInput, "graph weights must have a zero diagonal");
  }
}

std::string nli_text(const AnswerSet& answers, std::size_t index, const NliInputOptions& opts) {
  const std::string& a = answers.answers.at(index);
  if (!opts.include_question) return a;
  return "Question: " + answers.question + " Answer: " + a;
}

PairwiseJudgments::PairwiseJudgments(std::size_t n, std::vector<NliJudgment> offdiagonal_row_major)
    : n_(n), judgments_(std::move(offdiagonal_row_major)) {
  if (judgments_.size() != n_ * (n_ - (n_ > 0 ? 1 : 0))) {
    throw Error(ErrorCode::DimensionMismatch, "expected N(N-1) judgments");
  }
}

const NliJudgment& PairwiseJudgments::at(std::size_t i, std::size_t j) const {
  if (i == j || i >= n_ || j >= n_) throw Error(ErrorCode::InvalidInput, "invalid judgment index");
  // row i holds n-1 entries, skipping column i
  return judgments_[i * (n_ - 1) + (j < i ? j : j - 1)];
}

std::vector<TextPair> answer_pairs(const AnswerSet& answers, const NliInputOptions& opts) {
  const std::size_t n = answers.size();
  std::vector<std::string> texts;
  texts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) texts.push_back(nli_text(answers, i, opts));
  std::vector<TextPair> pairs;
  pairs.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) pairs.push_back({texts[i], texts[j]});
    }
  }
  return pairs;
}

PairwiseJudgments collect_judgments(const AnswerSet& answers, NliProvider& nli, const NliInputOptions& opts) {
  answers.validate();
  const auto pairs = answer_pairs(answers, opts);
  if (pairs.empty()) return PairwiseJudgments(answers.size(), {});
  return PairwiseJudgments(answers.size(), nli.judge_batch(pairs));
}

double edge_weight(const NliJudgment& forward, const NliJudgment& backward, WeightScheme scheme) {
  return weigh(forward, scheme) + weigh(backward, scheme);
}

bool bidirectionally_entails(const NliJudgment& forward, const NliJudgment& backward) {
  return forward.label() == NliLabel::Entailment && backward.label() == NliLabel::Entailment;
}

SemanticGraph weight_matrix_answers(const PairwiseJudgments& judgments, WeightScheme scheme) {
  const auto n = static_cast<Eigen::Index>(judgments.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      w(i, j) = w(j, i) = edge_weight(judgments.at(ui, uj), judgments.at(uj, ui), scheme);
    }
  }
  return SemanticGraph(SymMatrix(w), NodeKind::Answers);
}

SemanticGraph weight_matrix_answers(const AnswerSet& answers, NliProvider& nli, WeightScheme scheme,
                                    const NliInputOptions& opts) {
  return weight_matrix_answers(collect_judgments(answers, nli, opts), scheme);
}

SemanticGraph weight_matrix_clusters(const PairwiseJudgments& judgments, const Clustering& clustering,
                                     WeightScheme scheme) {
  if (clustering.num_items() != judgments.size()) {
    throw Error(ErrorCode::DimensionMismatch, "clustering does not cover the answer set");
  }
  const auto m = static_cast<Eigen::Index>(clustering.num_clusters());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  const std::size_t n = judgments.size();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = s + 1; t < n; ++t) {
      const auto cs = static_cast<Eigen::Index>(clustering.cluster_of(s));
      const auto ct = static_cast<Eigen::Index>(clustering.cluster_of(t));
      if (cs == ct) continue;
      const double v = edge_weight(judgments.at(s, t), judgments.at(t, s), scheme);
      w(cs, ct) += v;
      w(ct, cs) += v;
    }
  }
  return SemanticGraph(SymMatrix(w), NodeKind::Clusters);
}

SemanticGraph weight_matrix_clusters(const AnswerSet& answers, const Clustering& clustering,
                                     NliProvider& nli, WeightScheme scheme, const NliInputOptions& opts) {
  return weight_matrix_clusters(collect_judgments(answers, nli, opts), clustering, scheme);
}

Clustering bidirectional_cluster(const PairwiseJudgments& judgments) {
  const std::size_t n = judgments.size();
  std::vector<std::size_t> assignment(n);
  std::vector<std::size_t> representatives;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (; c < representatives.size(); ++c) {
      const std::size_t r = representatives[c];
      if (bidirectionally_entails(judgments.at(r, i), judgments.at(i, r))) break;
    }
    if (c == representatives.size()) representatives.push_back(i);
    assignment[i] = c;
  }
  return Clustering(std::move(assignment));
}

Clustering bidirectional_cluster(const AnswerSet& answers, NliProvider& nli, const NliInputOptions& opts) {
  answers.validate();
  const std::size_t n = answers.size();
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) texts.push_back(nli_text(answers, i, opts));
  std::vector<std::size_t> assignment(n);
  std::vector<std::size_t> representatives;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (; c < representatives.size(); ++c) {
      const std::size_t r = representatives[c];
      if (bidirectionally_entails(nli.judge(texts[r], texts[i]), nli.judge(texts[i], texts[r]))) break;
    }
    if (c == representatives.size()) representatives.push_back(i);
    assignment[i] = c;
  }
  return Clustering(std::move(assignment));
}

SymMatrix laplacian(const SemanticGraph& g, bool normalized) {
  const Eigen::MatrixXd& w = g.weights().matrix();
  const Eigen::VectorXd degree = w.rowwise().sum();
  Eigen::MatrixXd l = -w;
  l.diagonal() += degree;
  if (!normalized) return SymMatrix(l);
  Eigen::VectorXd s(degree.size());
  for (Eigen::Index i = 0; i < degree.size(); ++i) s(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  return SymMatrix(s.asDiagonal() * l * s.asDiagonal());
}

}  // namespace kle
