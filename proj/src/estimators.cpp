#include "kle/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "kle/error.hpp"

namespace kle {

std::string_view to_string(ProbMode mode) {
  return mode == ProbMode::Likelihood ? "likelihood" : "discrete";
}

double sequence_loglik(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw Error(ErrorCode::EmptySequence, "no token log-probabilities");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorCode::InvalidInput, "token log-probabilities must be finite and <= 0");
    }
    sum += lp;
  }
  return sum / static_cast<double>(token_logprobs.size());
}

std::vector<double> cluster_probs(const AnswerSet& answers, const Clustering& clustering, ProbMode mode) {
  if (clustering.num_items() != answers.size()) {
    throw Error(ErrorCode::DimensionMismatch, "clustering does not cover the answer set");
  }
  const std::size_t m = clustering.num_clusters();
  std::vector<double> probs(m, 0.0);
  if (mode == ProbMode::Discrete) {
    const double n = static_cast<double>(answers.size());
    for (std::size_t c = 0; c < m; ++c) probs[c] = static_cast<double>(clustering.sizes()[c]) / n;
    return probs;
  }
  if (!answers.token_logprobs) {
    throw Error(ErrorCode::MissingLogprobs, "likelihood cluster probabilities need token_logprobs");
  }
  std::vector<double> ll;
  ll.reserve(answers.size());
  for (const auto& seq : *answers.token_logprobs) ll.push_back(sequence_loglik(seq));
  // shift by the max for a stable exp; the normalization removes it
  const double top = *std::max_element(ll.begin(), ll.end());
  for (std::size_t i = 0; i < ll.size(); ++i) probs[clustering.cluster_of(i)] += std::exp(ll[i] - top);
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;
  return probs;
}

double semantic_entropy(std::span<const double> probs) {
  validate_probs(probs);
  return shannon_entropy(probs);
}

double predictive_entropy(const AnswerSet& answers) {
  if (!answers.token_logprobs) throw Error(ErrorCode::MissingLogprobs, "predictive entropy needs token_logprobs");
  answers.validate();
  double sum = 0.0;
  for (const auto& seq : *answers.token_logprobs) sum += sequence_loglik(seq);
  return 0.0 - sum / static_cast<double>(answers.size());
}

namespace {

ProbMode default_prob_mode(const AnswerSet& answers) {
  return answers.token_logprobs ? ProbMode::Likelihood : ProbMode::Discrete;
}

double kle_impl(const AnswerSet& answers, const PairwiseJudgments& judgments, const Clustering& clustering,
                const KernelConfig& cfg, WeightScheme scheme, ProbMode mode) {
  cfg.validate();
  if (answers.size() == 1) return 0.0;
  const SemanticGraph graph = weight_matrix_answers(judgments, scheme);
  std::vector<double> probs;
  ClusterContext ctx;
  if (cfg.needs_clustering()) {
    probs = cluster_probs(answers, clustering, mode);
    ctx = ClusterContext{&clustering, probs};
  }
  return von_neumann_entropy(build_kernel(graph, cfg, ctx).matrix);
}

double kle_c_impl(const AnswerSet& answers, const PairwiseJudgments& judgments, const Clustering& clustering,
                  const KernelConfig& cfg, WeightScheme scheme, ProbMode mode) {
  cfg.validate();
  if (clustering.num_clusters() == 1) return 0.0;
  const SemanticGraph graph = weight_matrix_clusters(judgments, clustering, scheme);
  std::vector<double> probs;
  ClusterContext ctx;
  if (cfg.needs_clustering()) {
    probs = cluster_probs(answers, clustering, mode);
    ctx = ClusterContext{&clustering, probs};
  }
  return von_neumann_entropy(build_kernel(graph, cfg, ctx).matrix);
}

}  // namespace

double kle(const AnswerSet& answers, const PairwiseJudgments& judgments, const KernelConfig& cfg,
           WeightScheme scheme) {
  const Clustering clustering = bidirectional_cluster(judgments);
  return kle_impl(answers, judgments, clustering, cfg, scheme, default_prob_mode(answers));
}

double kle_c(const AnswerSet& answers, const PairwiseJudgments& judgments, const KernelConfig& cfg,
             WeightScheme scheme) {
  const Clustering clustering = bidirectional_cluster(judgments);
  return kle_c_impl(answers, judgments, clustering, cfg, scheme, default_prob_mode(answers));
}

double kle(const AnswerSet& answers, NliProvider& nli, const KernelConfig& cfg, WeightScheme scheme,
           const NliInputOptions& opts) {
  return kle(answers, collect_judgments(answers, nli, opts), cfg, scheme);
}

double kle_c(const AnswerSet& answers, NliProvider& nli, const KernelConfig& cfg, WeightScheme scheme,
             const NliInputOptions& opts) {
  return kle_c(answers, collect_judgments(answers, nli, opts), cfg, scheme);
}

const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> names{
      std::string(methods::kKleHeat), std::string(methods::kKleFull), std::string(methods::kKleMatern),
      std::string(methods::kKlecHeat), std::string(methods::kSe),     std::string(methods::kDse),
      std::string(methods::kPe)};
  return names;
}

nlohmann::json UncertaintyScores::to_json() const {
  nlohmann::json j;
  j["scores"] = nlohmann::json::object();
  j["unavailable"] = nlohmann::json::object();
  for (const auto& [name, s] : methods) {
    if (s.value) {
      j["scores"][name] = *s.value;
    } else {
      j["unavailable"][name] = s.unavailable_reason;
    }
  }
  j["clustering"] = {{"num_clusters", clustering.num_clusters()},
                     {"sizes", clustering.sizes()},
                     {"assignment", clustering.assignment()}};
  j["kernels"] = nlohmann::json::object();
  for (const auto& [name, cfg] : kernel_configs) j["kernels"][name] = cfg;
  return j;
}

UncertaintyScores score_answer_set(const AnswerSet& answers, NliProvider& nli, const ScoringOptions& opts) {
  return score_answer_set(answers, collect_judgments(answers, nli, opts.nli_input), opts);
}

UncertaintyScores score_answer_set(const AnswerSet& answers, const PairwiseJudgments& judgments,
                                   const ScoringOptions& opts) {
  answers.validate();
  UncertaintyScores out{{}, bidirectional_cluster(judgments), {}};
  const Clustering& clustering = out.clustering;
  const bool has_logprobs = answers.token_logprobs.has_value();
  const ProbMode auto_mode = default_prob_mode(answers);
  const bool single = answers.size() == 1;

  auto unavailable = [](std::string reason) { return MethodScore{std::nullopt, std::move(reason)}; };

  for (const auto& name : opts.methods) {
    MethodScore score;
    if (name == methods::kKleHeat) {
      out.kernel_configs[name] = opts.heat.to_json();
      score.value = kle_impl(answers, judgments, clustering, opts.heat, opts.scheme, auto_mode);
    } else if (name == methods::kKleFull) {
      const ProbMode mode = opts.full_prob_mode.value_or(auto_mode);
      auto cfg_json = opts.full.to_json();
      cfg_json["cluster_probs"] = to_string(mode);
      out.kernel_configs[name] = cfg_json;
      if (mode == ProbMode::Likelihood && !has_logprobs) {
        score = unavailable("token_logprobs missing");
      } else {
        score.value = kle_impl(answers, judgments, clustering, opts.full, opts.scheme, mode);
      }
    } else if (name == methods::kKleMatern) {
      out.kernel_configs[name] = opts.matern.to_json();
      score.value = kle_impl(answers, judgments, clustering, opts.matern, opts.scheme, auto_mode);
    } else if (name == methods::kKlecHeat) {
      out.kernel_configs[name] = opts.clusters_heat.to_json();
      score.value = kle_c_impl(answers, judgments, clustering, opts.clusters_heat, opts.scheme, auto_mode);
    } else if (name == methods::kSe) {
      if (!has_logprobs) {
        score = unavailable("token_logprobs missing");
      } else {
        score.value = semantic_entropy(cluster_probs(answers, clustering, ProbMode::Likelihood));
      }
    } else if (name == methods::kDse) {
      score.value = semantic_entropy(cluster_probs(answers, clustering, ProbMode::Discrete));
    } else if (name == methods::kPe) {
      if (!has_logprobs) {
        score = unavailable("token_logprobs missing");
      } else {
        score.value = single ? 0.0 : predictive_entropy(answers);
      }
    } else {
      throw Error(ErrorCode::InvalidInput, "unknown method '" + name + "'");
    }
    if (single && score.value) score.value = 0.0;
    out.methods[name] = std::move(score);
  }
  return out;
}

}  // namespace kle
