#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "kle/estimators.hpp"
#include "kle/eval.hpp"
#include "kle/hyperparams.hpp"
#include "kle/nli.hpp"

namespace kle {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitProvider = 3,
  kExitPartial = 4,
};

/// One input line: the answer set plus any fields the reader does not
/// interpret, which are carried through to outputs untouched.
struct QuestionRecord {
  AnswerSet answers;
  nlohmann::json extra = nlohmann::json::object();
};

QuestionRecord parse_question_record(const nlohmann::json& j);
std::vector<QuestionRecord> read_question_file(const std::filesystem::path& path);

struct ProviderConfig {
  std::string kind = "mock";  // mock | file | http
  std::optional<std::filesystem::path> cache_path;
  std::optional<std::filesystem::path> mock_rules;
  std::string endpoint;
  std::string model_id = "unknown";
  int timeout_ms = 30000;

  nlohmann::json to_json() const;
};

// mock and http providers get a write-through cache when cache_path is set;
// file reads cache_path and never writes.
std::shared_ptr<NliProvider> make_provider(const ProviderConfig& cfg);

struct RunResult {
  int exit_code = kExitOk;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::vector<std::string> messages;
};

struct ScoreConfig {
  std::vector<std::filesystem::path> inputs;
  ProviderConfig provider;
  ScoringOptions scoring;
  std::string model = "unknown";
  std::string dataset;  // defaults to the first input's stem
  std::filesystem::path output_dir = "out";
  unsigned workers = 1;

  nlohmann::json to_json() const;
};

// Writes scores.jsonl and manifest.json into output_dir.
RunResult run_score(const ScoreConfig& cfg);

struct ClusterConfig {
  std::vector<std::filesystem::path> inputs;
  ProviderConfig provider;
  NliInputOptions nli_input;
  std::filesystem::path output_dir = "out";
  unsigned workers = 1;

  nlohmann::json to_json() const;
};

// Writes clusters.jsonl and manifest.json.
RunResult run_cluster(const ClusterConfig& cfg);

struct EvaluateConfig {
  std::vector<std::filesystem::path> inputs;  // scores.jsonl files
  std::size_t resamples = kDefaultResamples;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path output_dir = "out";

  nlohmann::json to_json() const;
};

// Writes reports.json, reports.csv and manifest.json.
RunResult run_evaluate(const EvaluateConfig& cfg);

struct EcpConfig {
  std::vector<std::size_t> vertex_counts{10, 20, 50};
  KernelFamily family = KernelFamily::Heat;
  std::vector<double> params{0.1, 0.3, 1.0, 5.0, 10.0};  // t for heat, kappa for Matern
  double nu = 1.0;
  bool normalized_laplacian = false;
  EdgeSchedule schedule = EdgeSchedule::Sequential;
  std::uint64_t seed = 0;
  double collapse_threshold = kDefaultCollapseThreshold;
  bool select = true;
  std::filesystem::path output_dir = "out";

  nlohmann::json to_json() const;
};

// Writes ecp.csv and manifest.json. Selected parameters, when requested, are
// returned as messages and recorded in the manifest.
RunResult run_ecp(const EcpConfig& cfg);

}  // namespace kle
