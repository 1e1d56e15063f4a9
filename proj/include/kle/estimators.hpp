#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kle/kernels.hpp"
#include "kle/nli.hpp"
#include "kle/semantic_graph.hpp"

namespace kle {

enum class ProbMode { Likelihood, Discrete };

std::string_view to_string(ProbMode mode);

// Mean token log-probability (log of the geometric mean token probability).
double sequence_loglik(std::span<const double> token_logprobs);

std::vector<double> cluster_probs(const AnswerSet& answers, const Clustering& clustering, ProbMode mode);

// -sum p ln p over a validated probability vector.
double semantic_entropy(std::span<const double> probs);

// -(1/N) sum_i sequence_loglik(answer_i)
double predictive_entropy(const AnswerSet& answers);

double kle(const AnswerSet& answers, NliProvider& nli, const KernelConfig& cfg,
           WeightScheme scheme = WeightScheme::OneHot, const NliInputOptions& opts = {});
double kle_c(const AnswerSet& answers, NliProvider& nli, const KernelConfig& cfg,
             WeightScheme scheme = WeightScheme::OneHot, const NliInputOptions& opts = {});

// Same computations over judgments that were already collected.
double kle(const AnswerSet& answers, const PairwiseJudgments& judgments, const KernelConfig& cfg,
           WeightScheme scheme);
double kle_c(const AnswerSet& answers, const PairwiseJudgments& judgments, const KernelConfig& cfg,
             WeightScheme scheme);

namespace methods {
inline constexpr std::string_view kKleHeat = "KLE_heat";
inline constexpr std::string_view kKleFull = "KLE_full";
inline constexpr std::string_view kKleMatern = "KLE_matern";
inline constexpr std::string_view kKlecHeat = "KLEc_heat";
inline constexpr std::string_view kSe = "SE";
inline constexpr std::string_view kDse = "DSE";
inline constexpr std::string_view kPe = "PE";
}  // namespace methods

const std::vector<std::string>& all_methods();

struct MethodScore {
  std::optional<double> value;
  std::string unavailable_reason;
};

struct UncertaintyScores {
  std::map<std::string, MethodScore> methods;
  Clustering clustering;
  std::map<std::string, nlohmann::json> kernel_configs;

  nlohmann::json to_json() const;
};

struct ScoringOptions {
  std::vector<std::string> methods = all_methods();
  KernelConfig heat = KernelConfig::heat();
  KernelConfig full = KernelConfig::full();
  KernelConfig matern = KernelConfig::matern();
  KernelConfig clusters_heat = KernelConfig::heat();
  WeightScheme scheme = WeightScheme::OneHot;
  NliInputOptions nli_input;
  // Cluster probabilities for KLE_full; unset means likelihood when token
  // log-probabilities are present, discrete otherwise.
  std::optional<ProbMode> full_prob_mode;
};

// Scores every requested method from a single NLI pass.
UncertaintyScores score_answer_set(const AnswerSet& answers, NliProvider& nli, const ScoringOptions& opts);
UncertaintyScores score_answer_set(const AnswerSet& answers, const PairwiseJudgments& judgments,
                                   const ScoringOptions& opts);

}  // namespace kle
