// kle: semantic uncertainty scoring from sampled answers.
//
//   kle score    --input answers.jsonl --nli mock --out out/
//   kle cluster  --input answers.jsonl --nli file --nli-cache cache.jsonl --out out/
//   kle evaluate --scores a/scores.jsonl --scores b/scores.jsonl --out eval/
//   kle ecp      --vertices 20 --params 0.3,1,5 --out ecp/
//
// Every subcommand also reads its flags from a TOML-style file via --config.

#include <CLI11.hpp>

#include <iostream>

#include "kle/error.hpp"
#include "kle/pipeline.hpp"

namespace {

void add_provider_options(CLI::App* cmd, kle::ProviderConfig& p) {
  cmd->add_option("--nli", p.kind, "NLI provider: mock, file or http")
      ->check(CLI::IsMember({"mock", "file", "http"}))
      ->capture_default_str();
  cmd->add_option("--nli-cache", p.cache_path,
                  "JSONL judgment cache (read by 'file'; write-through for mock/http)");
  cmd->add_option("--mock-rules", p.mock_rules, "JSON rule table for the mock provider")->check(CLI::ExistingFile);
  cmd->add_option("--nli-endpoint", p.endpoint, "inference service base URL (http provider)");
  cmd->add_option("--nli-model", p.model_id, "NLI model identifier recorded in manifests")->capture_default_str();
  cmd->add_option("--nli-timeout-ms", p.timeout_ms, "HTTP timeout in milliseconds")->capture_default_str();
}

int exit_code_for(const kle::Error& e) {
  switch (e.code()) {
    case kle::ErrorCode::ProviderUnavailable:
    case kle::ErrorCode::InvalidResponse:
    case kle::ErrorCode::CacheMiss:
      return kle::kExitProvider;
    default:
      return kle::kExitValidation;
  }
}

int report(const kle::RunResult& r) {
  for (const auto& m : r.messages) std::cerr << m << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic uncertainty scores for sampled LLM answers"};
  app.set_config("--config", "", "read options from a TOML-style key = value file");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kle::kToolVersion));

  // score -------------------------------------------------------------------
  kle::ScoreConfig score;
  double heat_t = 0.3, full_alpha = 0.5, full_t = 0.3, clusters_t = 0.3, nu = 1.0, kappa = 1.0;
  bool normalized_laplacian = false, normalize_after_combining = false, no_question = false;
  std::string scheme = "one-hot", full_probs = "auto";
  auto* score_cmd = app.add_subcommand("score", "score every answer set with the requested methods");
  score_cmd->add_option("-i,--input", score.inputs, "question JSONL file(s)")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("-o,--out", score.output_dir, "output directory")->capture_default_str();
  add_provider_options(score_cmd, score.provider);
  score_cmd->add_option("--methods", score.scoring.methods, "methods to compute")->delimiter(',');
  score_cmd->add_option("--heat-t", heat_t, "heat kernel lengthscale for KLE_heat")->capture_default_str();
  score_cmd->add_option("--full-alpha", full_alpha, "heat weight in KLE_full")->capture_default_str();
  score_cmd->add_option("--full-t", full_t, "heat lengthscale inside KLE_full")->capture_default_str();
  score_cmd->add_option("--clusters-t", clusters_t, "heat lengthscale for KLEc_heat")->capture_default_str();
  score_cmd->add_option("--nu", nu, "Matern smoothness")->capture_default_str();
  score_cmd->add_option("--kappa", kappa, "Matern lengthscale")->capture_default_str();
  score_cmd->add_flag("--normalized-laplacian", normalized_laplacian, "use the normalized graph Laplacian");
  score_cmd->add_flag("--normalize-after-combining", normalize_after_combining,
                      "KLE_full: mix raw kernels and normalize once");
  score_cmd->add_option("--scheme", scheme, "edge weights: one-hot or soft")
      ->check(CLI::IsMember({"one-hot", "soft"}))
      ->capture_default_str();
  score_cmd->add_option("--full-probs", full_probs, "KLE_full cluster probabilities: auto, likelihood, discrete")
      ->check(CLI::IsMember({"auto", "likelihood", "discrete"}))
      ->capture_default_str();
  score_cmd->add_flag("--no-question", no_question, "do not prepend the question to NLI inputs");
  score_cmd->add_option("--model", score.model, "model tag written to every record")->capture_default_str();
  score_cmd->add_option("--dataset", score.dataset, "dataset tag (default: input file stem)");
  score_cmd->add_option("-j,--workers", score.workers, "worker threads")->capture_default_str();

  // cluster -----------------------------------------------------------------
  kle::ClusterConfig cluster;
  bool cluster_no_question = false;
  auto* cluster_cmd = app.add_subcommand("cluster", "bidirectional-entailment clustering only");
  cluster_cmd->add_option("-i,--input", cluster.inputs, "question JSONL file(s)")->required()->check(CLI::ExistingFile);
  cluster_cmd->add_option("-o,--out", cluster.output_dir, "output directory")->capture_default_str();
  add_provider_options(cluster_cmd, cluster.provider);
  cluster_cmd->add_flag("--no-question", cluster_no_question, "do not prepend the question to NLI inputs");
  cluster_cmd->add_option("-j,--workers", cluster.workers, "worker threads")->capture_default_str();

  // evaluate ----------------------------------------------------------------
  kle::EvaluateConfig evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "AUROC/AUARC with bootstrap CIs and win rates");
  eval_cmd->add_option("-s,--scores", evaluate.inputs, "scores.jsonl file(s)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-o,--out", evaluate.output_dir, "output directory")->capture_default_str();
  eval_cmd->add_option("--resamples", evaluate.resamples, "bootstrap resamples")->capture_default_str();
  eval_cmd->add_option("--seed", evaluate.seed, "bootstrap seed")->capture_default_str();
  eval_cmd->add_option("-j,--threads", evaluate.threads, "bootstrap threads")->capture_default_str();

  // ecp ---------------------------------------------------------------------
  kle::EcpConfig ecp;
  std::string family = "heat", schedule = "sequential";
  bool no_select = false;
  auto* ecp_cmd = app.add_subcommand("ecp", "entropy convergence curves and lengthscale selection");
  ecp_cmd->add_option("--vertices", ecp.vertex_counts, "vertex counts")->delimiter(',')->capture_default_str();
  ecp_cmd->add_option("--family", family, "heat or matern")
      ->check(CLI::IsMember({"heat", "matern"}))
      ->capture_default_str();
  ecp_cmd->add_option("--params", ecp.params, "t (heat) or kappa (matern) grid")->delimiter(',')->capture_default_str();
  ecp_cmd->add_option("--nu", ecp.nu, "Matern smoothness")->capture_default_str();
  ecp_cmd->add_flag("--normalized-laplacian", ecp.normalized_laplacian, "use the normalized graph Laplacian");
  ecp_cmd->add_option("--schedule", schedule, "edge order: sequential or random")
      ->check(CLI::IsMember({"sequential", "random"}))
      ->capture_default_str();
  ecp_cmd->add_option("--seed", ecp.seed, "seed for the random schedule")->capture_default_str();
  ecp_cmd->add_option("--collapse-threshold", ecp.collapse_threshold, "scaled VNE collapse threshold")
      ->capture_default_str();
  ecp_cmd->add_flag("--no-select", no_select, "skip lengthscale selection");
  ecp_cmd->add_option("-o,--out", ecp.output_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kle::kExitValidation;
  }

  try {
    if (*score_cmd) {
      auto& s = score.scoring;
      s.heat = kle::KernelConfig::heat(heat_t, normalized_laplacian);
      s.full = kle::KernelConfig::full(full_alpha, full_t, normalized_laplacian);
      s.full.normalize_after_combining = normalize_after_combining;
      s.matern = kle::KernelConfig::matern(nu, kappa, normalized_laplacian);
      s.clusters_heat = kle::KernelConfig::heat(clusters_t, normalized_laplacian);
      s.scheme = kle::parse_weight_scheme(scheme);
      s.nli_input.include_question = !no_question;
      if (full_probs == "likelihood") s.full_prob_mode = kle::ProbMode::Likelihood;
      if (full_probs == "discrete") s.full_prob_mode = kle::ProbMode::Discrete;
      return report(kle::run_score(score));
    }
    if (*cluster_cmd) {
      cluster.nli_input.include_question = !cluster_no_question;
      return report(kle::run_cluster(cluster));
    }
    if (*eval_cmd) return report(kle::run_evaluate(evaluate));
    if (*ecp_cmd) {
      ecp.family = family == "heat" ? kle::KernelFamily::Heat : kle::KernelFamily::Matern;
      ecp.schedule = kle::parse_edge_schedule(schedule);
      ecp.select = !no_select;
      const auto r = kle::run_ecp(ecp);
      for (const auto& m : r.messages) std::cout << m << '\n';
      return r.exit_code;
    }
  } catch (const kle::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kle::kExitValidation;
  }
  return 0;
}
