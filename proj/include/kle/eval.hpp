#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kle {

// Probability that a random incorrect example has strictly higher
// uncertainty than a random correct one, ties credited 0.5.
double auroc(std::span<const double> uncertainties, const std::vector<bool>& correct);

// Mean prefix accuracy over examples sorted by ascending uncertainty (stable).
double auarc(std::span<const double> uncertainties, const std::vector<bool>& correct);

using Metric = std::function<double(std::span<const double>, const std::vector<bool>&)>;

struct ConfidenceInterval {
  double low = 0.0;
  double point = 0.0;
  double high = 0.0;
};

/// Resampled example indices shared by every method of one scenario.
struct BootstrapPlan {
  std::vector<std::vector<std::size_t>> resamples;
  std::size_t skipped = 0;  // resamples dropped after exhausting redraws
};

inline constexpr std::size_t kDefaultResamples = 1000;
inline constexpr int kMaxRedraws = 100;

// Resample i, attempt a draws from an engine seeded by (seed, i, a), so the
// plan does not depend on thread count. With require_both_classes, resamples
// holding a single label class are redrawn up to kMaxRedraws times.
BootstrapPlan draw_resamples(const std::vector<bool>& correct, std::size_t resamples, std::uint64_t seed,
                             bool require_both_classes, unsigned threads = 1);

// Percentile (2.5, 97.5) interval; the point estimate uses all examples.
ConfidenceInterval bootstrap_ci(const Metric& metric, std::span<const double> uncertainties,
                                const std::vector<bool>& correct, const BootstrapPlan& plan);
ConfidenceInterval bootstrap_ci(const Metric& metric, std::span<const double> uncertainties,
                                const std::vector<bool>& correct, std::size_t resamples, std::uint64_t seed,
                                bool require_both_classes = true);

struct ScoredExample {
  std::string question_id;
  std::map<std::string, double> scores;
  bool correct = false;
};

enum class MetricKind { Auroc, Auarc };
std::string_view to_string(MetricKind kind);

struct MethodReport {
  std::optional<ConfidenceInterval> auroc;  // absent when labels are degenerate
  ConfidenceInterval auarc;
};

struct ScenarioReport {
  std::string model;
  std::string dataset;
  std::size_t example_count = 0;
  bool degenerate_labels = false;
  std::size_t skipped_resamples = 0;
  std::map<std::string, MethodReport> methods;
  std::vector<std::string> excluded_methods;  // not scored on every example

  std::string id() const { return model + "/" + dataset; }
  nlohmann::json to_json() const;
};

ScenarioReport evaluate_scenario(const std::string& model, const std::string& dataset,
                                 std::span<const ScoredExample> examples,
                                 std::size_t resamples = kDefaultResamples, std::uint64_t seed = 0,
                                 unsigned threads = 1);

struct WinRateMatrix {
  MetricKind metric = MetricKind::Auroc;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> fraction;   // row beats column
  std::vector<std::vector<std::size_t>> wins;
  std::vector<std::vector<std::size_t>> ties;
  std::vector<std::vector<std::size_t>> scenarios;
  std::vector<std::vector<double>> p_values;   // one-sided, ties excluded
  double significance = 0.05;

  nlohmann::json to_json() const;
};

// Degenerate-label scenarios are skipped for AUROC.
WinRateMatrix win_rate(std::span<const ScenarioReport> reports, MetricKind metric);

// P(X >= wins) for X ~ Binomial(n, p0), by exact summation.
double binomial_significance(std::size_t wins, std::size_t n, double p0 = 0.5);

// Flat rows: scenario,method,metric,point,lo,hi
void write_reports_csv(std::ostream& out, std::span<const ScenarioReport> reports);

}  // namespace kle
