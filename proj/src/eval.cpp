#include "kle/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "kle/error.hpp"
#include "kle/format.hpp"

namespace kle {

namespace {

void check_lengths(std::span<const double> u, const std::vector<bool>& correct) {
  if (u.size() != correct.size()) {
    throw Error(ErrorCode::DimensionMismatch, "uncertainties and labels differ in length");
  }
}

double percentile(std::vector<double> sorted_values, double q) {
  std::sort(sorted_values.begin(), sorted_values.end());
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

bool both_classes(const std::vector<bool>& correct) {
  const auto c = std::count(correct.begin(), correct.end(), true);
  return c > 0 && c < static_cast<std::ptrdiff_t>(correct.size());
}

}  // namespace

double auroc(std::span<const double> uncertainties, const std::vector<bool>& correct) {
  check_lengths(uncertainties, correct);
  const std::size_t n = uncertainties.size();
  std::size_t n_incorrect = 0;
  for (bool c : correct) n_incorrect += c ? 0 : 1;
  const std::size_t n_correct = n - n_incorrect;
  if (n_incorrect == 0 || n_correct == 0) {
    throw Error(ErrorCode::DegenerateLabels, "AUROC needs both correct and incorrect examples");
  }
  for (double x : uncertainties) {
    if (std::isnan(x)) throw Error(ErrorCode::NonFinite, "uncertainty is NaN");
  }
  // Mann-Whitney U over midranks; incorrect examples are the positive class.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && uncertainties[order[j + 1]] == uncertainties[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (!correct[order[k]]) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double ni = static_cast<double>(n_incorrect);
  const double u = rank_sum - ni * (ni + 1.0) / 2.0;
  return u / (ni * static_cast<double>(n_correct));
}

double auarc(std::span<const double> uncertainties, const std::vector<bool>& correct) {
  check_lengths(uncertainties, correct);
  const std::size_t n = uncertainties.size();
  if (n == 0) throw Error(ErrorCode::TooFewExamples, "AUARC of zero examples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return uncertainties[a] < uncertainties[b]; });
  double area = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    hits += correct[order[k]] ? 1 : 0;
    area += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return area / static_cast<double>(n);
}

BootstrapPlan draw_resamples(const std::vector<bool>& correct, std::size_t resamples, std::uint64_t seed,
                             bool require_both_classes, unsigned threads) {
  const std::size_t n = correct.size();
  if (n < 2) throw Error(ErrorCode::TooFewExamples, "bootstrap needs at least two examples");
  std::vector<std::optional<std::vector<std::size_t>>> drawn(resamples);

  auto draw_one = [&](std::size_t index) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(attempt)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<std::size_t> idx(n);
      bool any_correct = false;
      bool any_incorrect = false;
      for (auto& i : idx) {
        i = pick(rng);
        (correct[i] ? any_correct : any_incorrect) = true;
      }
      if (!require_both_classes || (any_correct && any_incorrect)) {
        drawn[index] = std::move(idx);
        return;
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < resamples; ++i) draw_one(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < resamples; i += threads) draw_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  BootstrapPlan plan;
  for (auto& d : drawn) {
    if (d) {
      plan.resamples.push_back(std::move(*d));
    } else {
      ++plan.skipped;
    }
  }
  return plan;
}

ConfidenceInterval bootstrap_ci(const Metric& metric, std::span<const double> uncertainties,
                                const std::vector<bool>& correct, const BootstrapPlan& plan) {
  check_lengths(uncertainties, correct);
  ConfidenceInterval ci;
  ci.point = metric(uncertainties, correct);
  if (plan.resamples.empty()) {
    ci.low = ci.high = ci.point;
    return ci;
  }
  std::vector<double> values;
  values.reserve(plan.resamples.size());
  std::vector<double> u(uncertainties.size());
  std::vector<bool> y(uncertainties.size());
  for (const auto& idx : plan.resamples) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      u[k] = uncertainties[idx[k]];
      y[k] = correct[idx[k]];
    }
    values.push_back(metric(u, y));
  }
  ci.low = percentile(values, 0.025);
  ci.high = percentile(values, 0.975);
  // the percentile interval need not contain the full-sample estimate
  ci.low = std::min(ci.low, ci.point);
  ci.high = std::max(ci.high, ci.point);
  return ci;
}

ConfidenceInterval bootstrap_ci(const Metric& metric, std::span<const double> uncertainties,
                                const std::vector<bool>& correct, std::size_t resamples, std::uint64_t seed,
                                bool require_both_classes) {
  return bootstrap_ci(metric, uncertainties, correct,
                      draw_resamples(correct, resamples, seed, require_both_classes));
}

std::string_view to_string(MetricKind kind) { return kind == MetricKind::Auroc ? "auroc" : "auarc"; }

namespace {

nlohmann::json ci_json(const ConfidenceInterval& ci) {
  return {{"point", ci.point}, {"lo", ci.low}, {"hi", ci.high}};
}

}  // namespace

nlohmann::json ScenarioReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = id();
  j["model"] = model;
  j["dataset"] = dataset;
  j["example_count"] = example_count;
  j["degenerate_labels"] = degenerate_labels;
  j["skipped_resamples"] = skipped_resamples;
  j["excluded_methods"] = excluded_methods;
  j["methods"] = nlohmann::json::object();
  for (const auto& [name, m] : methods) {
    nlohmann::json mj;
    mj["auroc"] = m.auroc ? ci_json(*m.auroc) : nlohmann::json(nullptr);
    mj["auarc"] = ci_json(m.auarc);
    j["methods"][name] = mj;
  }
  return j;
}

ScenarioReport evaluate_scenario(const std::string& model, const std::string& dataset,
                                 std::span<const ScoredExample> examples, std::size_t resamples,
                                 std::uint64_t seed, unsigned threads) {
  if (examples.size() < 2) throw Error(ErrorCode::TooFewExamples, "scenario " + model + "/" + dataset);
  ScenarioReport report;
  report.model = model;
  report.dataset = dataset;
  report.example_count = examples.size();

  std::vector<bool> correct;
  std::set<std::string> names;
  for (const auto& e : examples) {
    correct.push_back(e.correct);
    for (const auto& [name, v] : e.scores) names.insert(name);
  }
  report.degenerate_labels = !both_classes(correct);
  const BootstrapPlan plan = draw_resamples(correct, resamples, seed, !report.degenerate_labels, threads);
  report.skipped_resamples = plan.skipped;

  for (const auto& name : names) {
    std::vector<double> u;
    u.reserve(examples.size());
    for (const auto& e : examples) {
      const auto it = e.scores.find(name);
      if (it == e.scores.end()) break;
      u.push_back(it->second);
    }
    if (u.size() != examples.size()) {
      report.excluded_methods.push_back(name);
      continue;
    }
    MethodReport m;
    m.auarc = bootstrap_ci(auarc, u, correct, plan);
    if (!report.degenerate_labels) m.auroc = bootstrap_ci(auroc, u, correct, plan);
    report.methods.emplace(name, m);
  }
  return report;
}

nlohmann::json WinRateMatrix::to_json() const {
  return {{"metric", to_string(metric)}, {"methods", methods},     {"fraction", fraction},
          {"wins", wins},                {"ties", ties},           {"scenarios", scenarios},
          {"p_values", p_values},        {"significance", significance}};
}

WinRateMatrix win_rate(std::span<const ScenarioReport> reports, MetricKind metric) {
  std::set<std::string> names;
  for (const auto& r : reports) {
    for (const auto& [name, m] : r.methods) names.insert(name);
  }
  WinRateMatrix out;
  out.metric = metric;
  out.methods.assign(names.begin(), names.end());
  const std::size_t k = out.methods.size();
  out.fraction.assign(k, std::vector<double>(k, 0.5));
  out.wins.assign(k, std::vector<std::size_t>(k, 0));
  out.ties.assign(k, std::vector<std::size_t>(k, 0));
  out.scenarios.assign(k, std::vector<std::size_t>(k, 0));
  out.p_values.assign(k, std::vector<double>(k, 1.0));

  auto value = [metric](const ScenarioReport& r, const std::string& name) -> std::optional<double> {
    const auto it = r.methods.find(name);
    if (it == r.methods.end()) return std::nullopt;
    if (metric == MetricKind::Auroc) {
      if (r.degenerate_labels || !it->second.auroc) return std::nullopt;
      return it->second.auroc->point;
    }
    return it->second.auarc.point;
  };

  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      std::size_t n = 0;
      std::size_t wins = 0;
      std::size_t ties = 0;
      for (const auto& r : reports) {
        const auto va = value(r, out.methods[a]);
        const auto vb = value(r, out.methods[b]);
        if (!va || !vb) continue;
        ++n;
        if (*va > *vb) {
          ++wins;
        } else if (*va == *vb) {
          ++ties;
        }
      }
      if (n == 0) {
        throw Error(ErrorCode::NoCommonScenarios,
                    "no scenario scores both " + out.methods[a] + " and " + out.methods[b]);
      }
      out.wins[a][b] = wins;
      out.ties[a][b] = ties;
      out.scenarios[a][b] = n;
      out.fraction[a][b] = (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / static_cast<double>(n);
      out.p_values[a][b] = binomial_significance(wins, n - ties);
    }
  }
  return out;
}

double binomial_significance(std::size_t wins, std::size_t n, double p0) {
  if (wins > n) throw Error(ErrorCode::InvalidInput, "wins exceed trials");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(ErrorCode::InvalidProbs, "p0 outside [0, 1]");
  if (wins == 0) return 1.0;
  if (p0 == 0.0) return 0.0;
  if (p0 == 1.0) return 1.0;
  // pmf(k - 1) = pmf(k) * k / (n - k + 1) * q / p, starting from pmf(n) = p^n
  const long double p = p0;
  const long double ratio = (1.0L - p) / p;
  long double term = std::pow(p, static_cast<long double>(n));
  if (term > 0.0L && std::isfinite(term)) {
    long double sum = 0.0L;
    for (std::size_t k = n;; --k) {
      sum += term;
      if (k == wins) break;
      term *= static_cast<long double>(k) / static_cast<long double>(n - k + 1) * ratio;
    }
    return std::min(1.0, static_cast<double>(sum));
  }
  // p^n underflows: log pmf(k) = log C(n,k) + k log p + (n-k) log(1-p)
  const double lp = std::log(p0);
  const double lq = std::log1p(-p0);
  const double nd = static_cast<double>(n);
  std::vector<double> logs;
  logs.reserve(n - wins + 1);
  for (std::size_t k = wins; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    logs.push_back(std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) + kd * lp +
                   (nd - kd) * lq);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0;
  for (double l : logs) sum += std::exp(l - top);
  return std::min(1.0, std::exp(top) * sum);
}

void write_reports_csv(std::ostream& out, std::span<const ScenarioReport> reports) {
  out << "scenario,method,metric,point,lo,hi\n";
  auto row = [&](const ScenarioReport& r, const std::string& method, std::string_view metric,
                 const ConfidenceInterval& ci) {
    out << r.id() << ',' << method << ',' << metric << ',' << format_double(ci.point) << ','
        << format_double(ci.low) << ',' << format_double(ci.high) << '\n';
  };
  for (const auto& r : reports) {
    for (const auto& [name, m] : r.methods) {
      if (m.auroc) row(r, name, "auroc", *m.auroc);
      row(r, name, "auarc", m.auarc);
    }
  }
}

}  // namespace kle
