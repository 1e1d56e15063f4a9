// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "kle/error.hpp"
#include "kle/estimators.hpp"
#include "kle/eval.hpp"
#include "kle/hyperparams.hpp"
#include "kle/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
namespace kt = kle::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    out.pass = false;
    out.detail += "; exceeded " + std::to_string(time_limit_s) + " s";
  }
  if (!out.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.3f s)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(), out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::MatrixXd block_kernel_oracle(const std::vector<std::size_t>& assign, const std::vector<double>& p) {
  const auto n = static_cast<Eigen::Index>(assign.size());
  std::vector<double> size(p.size(), 0.0);
  for (auto a : assign) size[a] += 1.0;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (assign[std::size_t(i)] == assign[std::size_t(j)]) k(i, j) = p[assign[std::size_t(i)]] / size[assign[std::size_t(i)]];
  return k;
}

double shannon_oracle(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

Outcome se_recovery() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    const kle::Clustering c(kt::random_assignment(rng, n));
    const auto p = kt::random_probs(rng, c.num_clusters());
    const auto k = kle::se_block_kernel(c, p);
    const double se = shannon_oracle(p);
    worst = std::max(worst, std::abs(kle::von_neumann_entropy(k.matrix) - se));
    worst = std::max(worst, std::abs(kt::oracle_vne(block_kernel_oracle(c.assignment(), p)) - se));
    worst = std::max(worst, (k.matrix.matrix().matrix() - block_kernel_oracle(c.assignment(), p)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, "200 instances, max |VNE - SE| = " + fmt("%.3g", worst)};
}

Outcome vne_properties() {
  std::mt19937_64 rng(202);
  double basis = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 11);
    const auto k = kt::random_density(rng, n, 1 + Eigen::Index(rng() % std::uint64_t(n)));
    const auto q = kt::random_orthogonal(rng, n);
    const Eigen::MatrixXd rotated = q * k * q.transpose();
    const double a = kle::von_neumann_entropy(kle::DensityMatrix(kle::SymMatrix(k)));
    const double b = kle::von_neumann_entropy(kle::DensityMatrix(kle::SymMatrix(rotated)));
    basis = std::max(basis, std::abs(a - b));
  }
  double concavity_violation = 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 11);
    const auto a = kt::random_density(rng, n, 1 + Eigen::Index(rng() % std::uint64_t(n)));
    const auto b = kt::random_density(rng, n, 1 + Eigen::Index(rng() % std::uint64_t(n)));
    const double lam = unif(rng);
    const Eigen::MatrixXd mix = lam * a + (1 - lam) * b;
    auto h = [](const Eigen::MatrixXd& m) { return kle::von_neumann_entropy(kle::DensityMatrix(kle::SymMatrix(m))); };
    concavity_violation = std::max(concavity_violation, lam * h(a) + (1 - lam) * h(b) - h(mix));
    concavity_violation = std::max(concavity_violation, lam * kt::oracle_vne(a) + (1 - lam) * kt::oracle_vne(b) - kt::oracle_vne(mix));
  }
  double rank_one = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + Eigen::Index(rng() % 12);
    const auto k = kt::random_density(rng, n, 1);
    rank_one = std::max(rank_one, std::abs(kle::von_neumann_entropy(kle::DensityMatrix(kle::SymMatrix(k)))));
  }
  const bool ok = basis <= 1e-8 && concavity_violation <= 1e-10 && rank_one <= 1e-10;
  return {ok, "basis " + fmt("%.3g", basis) + ", concavity slack " + fmt("%.3g", concavity_violation) +
                  ", rank-1 " + fmt("%.3g", rank_one)};
}

Outcome heat_identity() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 11);
    const Eigen::MatrixXd l = kt::laplacian_of(kt::random_weights(rng, n, 0.3 + 0.6 * unif(rng), 2.0));
    const double norm = l.cwiseAbs().rowwise().sum().maxCoeff();
    const double t = norm > 0 ? unif(rng) * 5.0 / norm : unif(rng);
    const auto k = kle::spectral_map(kle::SymMatrix(l), [t](double x) { return std::exp(-t * x); });
    worst = std::max(worst, (k.matrix() - kt::taylor_exp(-t * l, 60)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, "50 Laplacians, max |spectral - Taylor| = " + fmt("%.3g", worst)};
}

Outcome matern_to_heat() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng() % 11);
    const kle::SemanticGraph g(kle::SymMatrix(kt::random_weights(rng, n, 0.5, 2.0)), kle::NodeKind::Answers);
    const auto m = kle::build_kernel(g, kle::KernelConfig::matern(200.0, 1.0));
    const auto h = kle::build_kernel(g, kle::KernelConfig::heat(0.5));
    worst = std::max(worst, (m.matrix.matrix().matrix() - h.matrix.matrix().matrix()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-2, "20 graphs, max-norm gap = " + fmt("%.3g", worst)};
}

kle::MockNliProvider twin_provider(const std::vector<std::size_t>& sizes, kle::NliLabel cross,
                                   std::vector<std::string>& answers) {
  kle::MockNliProvider mock;
  for (std::size_t g = 0; g < sizes.size(); ++g)
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      answers.push_back("cluster" + std::to_string(g) + " phrasing" + std::to_string(i));
      mock.set_group(answers.back(), std::to_string(g));
    }
  mock.set_cross_group(kle::NliJudgment::one_hot(cross));
  return mock;
}

double twin_oracle(const std::vector<std::size_t>& sizes, double cross_weight) {
  std::vector<std::size_t> group;
  for (std::size_t g = 0; g < sizes.size(); ++g) group.insert(group.end(), sizes[g], g);
  const auto n = Eigen::Index(group.size());
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      w(i, j) = i == j ? 0.0 : group[std::size_t(i)] == group[std::size_t(j)] ? 2.0 : cross_weight;
  return kt::oracle_vne(kt::oracle_normalize(kt::oracle_expm(-0.3 * kt::laplacian_of(w))));
}

Outcome twin_scenarios() {
  const std::vector<std::size_t> sizes{4, 3, 3};
  std::vector<std::string> a1;
  std::vector<std::string> a2;
  auto llm1 = twin_provider(sizes, kle::NliLabel::Contradiction, a1);
  auto llm2 = twin_provider(sizes, kle::NliLabel::Neutral, a2);
  kle::ScoringOptions opts;
  opts.methods = {"KLE_heat", "DSE"};
  opts.nli_input.include_question = false;
  kle::AnswerSet s1{"llm1", "q", a1, {}, {}, {}};
  kle::AnswerSet s2{"llm2", "q", a2, {}, {}, {}};
  const auto r1 = kle::score_answer_set(s1, llm1, opts);
  const auto r2 = kle::score_answer_set(s2, llm2, opts);
  const double se1 = *r1.methods.at("DSE").value;
  const double se2 = *r2.methods.at("DSE").value;
  const double k1 = *r1.methods.at("KLE_heat").value;
  const double k2 = *r2.methods.at("KLE_heat").value;
  const double o1 = twin_oracle(sizes, 0.0);
  const double o2 = twin_oracle(sizes, 1.0);
  const double se_oracle = shannon_oracle({0.4, 0.3, 0.3});
  const bool ok = r1.clustering.sizes() == sizes && r2.clustering.sizes() == sizes && std::abs(se1 - se2) <= 1e-9 &&
                  std::abs(se1 - se_oracle) <= 1e-9 && std::abs(k1 - o1) <= 1e-9 && std::abs(k2 - o2) <= 1e-9 &&
                  k1 - k2 >= 0.05;
  return {ok, "SE " + fmt("%.6f", se1) + " vs " + fmt("%.6f", se2) + ", KLE LLM1 " + fmt("%.5f", k1) + " (oracle " +
                  fmt("%.5f", o1) + ") LLM2 " + fmt("%.5f", k2) + " (oracle " + fmt("%.5f", o2) + ")"};
}

double pairwise_auroc(const std::vector<double>& u, const std::vector<bool>& c) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < u.size(); ++j)
      if (!c[i] && c[j]) {
        num += u[i] > u[j] ? 1.0 : u[i] == u[j] ? 0.5 : 0.0;
        den += 1.0;
      }
  return num / den;
}

Outcome auroc_oracle() {
  const std::vector<bool> tf{true, false};
  const bool worked = kle::auroc(std::vector<double>{0.1, 0.9}, tf) == 1.0 &&
                      kle::auroc(std::vector<double>{0.9, 0.1}, tf) == 0.0 &&
                      kle::auroc(std::vector<double>{0.5, 0.5}, tf) == 0.5;
  std::mt19937_64 rng(606);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> u(n);
    std::vector<bool> c(n);
    const std::uint64_t levels = trial % 2 ? 7 : 1000003;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = double(rng() % levels) / 3.0;
      c[i] = rng() % 2;
    }
    c[0] = true;
    c[1] = false;
    if (kle::auroc(u, c) != pairwise_auroc(u, c)) ++mismatches;
  }
  return {worked && mismatches == 0,
          std::string("worked examples ") + (worked ? "exact" : "wrong") + ", " + std::to_string(mismatches) +
              "/100 mismatches"};
}

Outcome auarc_values() {
  const bool worked = kle::auarc(std::vector<double>{0.1, 0.9}, std::vector<bool>{true, false}) == 0.75 &&
                      kle::auarc(std::vector<double>{0.1, 0.9}, std::vector<bool>{false, true}) == 0.25;
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int changed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng() % 100;
    std::vector<double> u(n);
    std::vector<bool> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = std::round(unif(rng) * 20) / 20;
      c[i] = rng() % 2;
    }
    const double a = 0.1 + 3 * unif(rng);
    const double b = unif(rng) - 0.5;
    const int shape = trial % 3;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = u[i];
      v[i] = shape == 0 ? a * x + b : shape == 1 ? std::exp(a * x) + b : std::atan(a * x) + x * x * x;
    }
    if (kle::auarc(u, c) != kle::auarc(v, c)) ++changed;
  }
  return {worked && changed == 0, std::string("two-point examples ") + (worked ? "exact" : "wrong") + ", " +
                                      std::to_string(changed) + "/50 monotone maps changed the value"};
}

Outcome binomial_threshold() {
  std::size_t w = 0;
  while (w * 100 < 62 * 60) ++w;
  // independent oracle: exact rational tail via long double pmf recurrence
  auto tail = [](std::size_t k, std::size_t n) {
    long double term = std::pow(0.5L, static_cast<long double>(n));
    long double s = 0.0L;
    for (std::size_t i = 0; i <= n; ++i) {
      if (i >= k) s += term;
      term = term * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    }
    return double(s);
  };
  const double p_w = kle::binomial_significance(w, 60);
  const double p_30 = kle::binomial_significance(30, 60);
  const bool ok = p_w < 0.05 && std::abs(p_w - tail(w, 60)) < 1e-12 && std::abs(p_30 - 0.551) <= 1e-3 &&
                  std::abs(p_30 - tail(30, 60)) < 1e-12;
  return {ok, "smallest w with w/60 >= 0.62 is " + std::to_string(w) + ", p = " + fmt("%.6f", p_w) +
                  "; p(30/60) = " + fmt("%.6f", p_30)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("kle_acceptance_" + std::to_string(rd()));
  fs::create_directories(root);
  std::mt19937_64 rng(909);
  const std::vector<std::string> pool{"Paris", "Rome", "Berlin", "Madrid", "Lisbon", "Vienna", "Prague", "Oslo"};
  json rules{{"groups", json::object()}, {"cross_group", "contradiction"}, {"rules", json::array()}};
  std::ofstream qs(root / "questions.jsonl");
  for (int q = 0; q < 50; ++q) {
    json rec{{"id", "syn-" + std::to_string(q)}, {"question", "Synthetic question " + std::to_string(q) + "?"},
             {"correct", rng() % 2 == 0}};
    const std::size_t n = 5 + rng() % 6;
    json answers = json::array();
    json logprobs = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& base = pool[rng() % 4 + (q % 2) * 4];
      const std::string text = rng() % 2 ? base : "It is " + base;
      answers.push_back(text);
      rules["groups"][text] = base;
      json lp = json::array();
      for (std::size_t t = 0; t < 1 + rng() % 4; ++t) lp.push_back(-double(rng() % 1000) / 400.0);
      logprobs.push_back(lp);
    }
    rec["answers"] = answers;
    if (q % 5 != 0) rec["token_logprobs"] = logprobs;
    qs << rec.dump() << "\n";
  }
  rules["rules"].push_back({{"premise", "Paris"}, {"hypothesis", "Rome"}, {"label", "neutral"}});
  rules["rules"].push_back({{"premise", "Rome"}, {"hypothesis", "Paris"}, {"p", {0.2, 0.5, 0.3}}});
  qs.close();
  std::ofstream(root / "rules.json") << rules.dump();

  kle::ScoreConfig cfg;
  cfg.inputs = {root / "questions.jsonl"};
  cfg.provider.kind = "mock";
  cfg.provider.mock_rules = root / "rules.json";
  cfg.model = "synthetic";
  std::vector<std::string> outputs;
  for (auto [dir, workers] : {std::pair{"run1", 1u}, {"run2", 1u}, {"run8", 8u}}) {
    cfg.output_dir = root / dir;
    cfg.workers = workers;
    const auto r = kle::run_score(cfg);
    if (r.exit_code != kle::kExitOk) {
      fs::remove_all(root);
      return {false, "run " + std::string(dir) + " exited " + std::to_string(r.exit_code)};
    }
    outputs.push_back(slurp(cfg.output_dir / "scores.jsonl"));
  }
  fs::remove_all(root);
  std::size_t lines = 0;
  for (char ch : outputs[0]) lines += ch == '\n';
  const bool ok = lines == 50 && outputs[0] == outputs[1] && outputs[0] == outputs[2];
  return {ok, std::to_string(lines) + " records; rerun " + (outputs[0] == outputs[1] ? "identical" : "differs") +
                  "; workers 1 vs 8 " + (outputs[0] == outputs[2] ? "identical" : "differs")};
}

Outcome convergence_plots() {
  bool starts = true;
  std::string detail;
  std::map<double, bool> collapsed;
  for (double t : {0.3, 5.0, 10.0}) {
    for (auto schedule : {kle::EdgeSchedule::Sequential, kle::EdgeSchedule::Random}) {
      const auto c = kle::entropy_convergence_curve(20, kle::KernelConfig::heat(t), schedule, 7);
      starts = starts && c.points.front().edge_count == 0 && std::abs(c.points.front().vne_scaled - 1.0) < 1e-12;
      const bool col = kle::collapses(c);
      if (schedule == kle::EdgeSchedule::Sequential) collapsed[t] = col;
      detail += "t=" + fmt("%g", t) + "/" + std::string(kle::to_string(schedule)) + (col ? " collapses" : " survives") + "; ";
    }
  }
  const bool ok = starts && collapsed[5.0] && collapsed[10.0] && !collapsed[0.3];
  return {ok, detail + (starts ? "all curves start at 1" : "a curve does not start at 1")};
}

}  // namespace

int main() {
  run(1, "SE recovery by the block kernel", 5.0, se_recovery);
  run(2, "VNE basis invariance, concavity, rank-1 zero entropy", 10.0, vne_properties);
  run(3, "heat kernel spectral map vs truncated Taylor series", 0.0, heat_identity);
  run(4, "Matern (nu=200, kappa=1) converges to heat (t=0.5)", 0.0, matern_to_heat);
  run(5, "twin scenarios: equal SE, KLE lower with neutral links", 0.0, twin_scenarios);
  run(6, "AUROC equals pairwise counting", 0.0, auroc_oracle);
  run(7, "AUARC worked values and monotone invariance", 0.0, auarc_values);
  run(8, "binomial threshold at n=60", 0.0, binomial_threshold);
  run(9, "score output byte-identical across runs and worker counts", 30.0, determinism);
  run(10, "entropy convergence curves and collapse", 0.0, convergence_plots);
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}
