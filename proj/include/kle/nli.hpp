#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kle {

enum class NliLabel { Entailment = 0, Neutral = 1, Contradiction = 2 };

std::string_view to_string(NliLabel label);
NliLabel parse_nli_label(std::string_view s);

/// Directional NLI output for an ordered (premise, hypothesis) pair.
class NliJudgment {
 public:
  static constexpr double kSumTolerance = 1e-6;

  // Validates nonnegativity and sum-to-one within kSumTolerance.
  NliJudgment(double p_entail, double p_neutral, double p_contra);

  static NliJudgment one_hot(NliLabel label);

  double p_entail() const noexcept { return p_[0]; }
  double p_neutral() const noexcept { return p_[1]; }
  double p_contra() const noexcept { return p_[2]; }
  const std::array<double, 3>& probs() const noexcept { return p_; }

  // argmax with ties broken entailment > neutral > contradiction
  NliLabel label() const noexcept;

  friend bool operator==(const NliJudgment&, const NliJudgment&) = default;

 private:
  std::array<double, 3> p_;
};

struct TextPair {
  std::string premise;
  std::string hypothesis;
};

// Trims leading/trailing whitespace; no other normalization.
std::string canonicalize_text(std::string_view text);

// Lowercase hex SHA-256 of the canonicalized text.
std::string text_digest(std::string_view text);

class NliProvider {
 public:
  virtual ~NliProvider() = default;

  virtual NliJudgment judge(std::string_view premise, std::string_view hypothesis) = 0;

  // Order-preserving. The default maps judge() and rethrows the first failure
  // with the index of the failing pair attached.
  virtual std::vector<NliJudgment> judge_batch(std::span<const TextPair> pairs);

  // Provider name and model identifier, recorded in run manifests.
  virtual std::string identity() const = 0;
};

struct NliCacheRecord {
  std::string premise;
  std::string hypothesis;
  NliJudgment judgment;
};

/// In-memory map from ordered text-pair digests to judgments, with JSONL
/// persistence (one record per ordered pair).
class NliCache {
 public:
  NliCache() = default;
  explicit NliCache(std::string provenance) : provenance_(std::move(provenance)) {}

  static NliCache load(const std::filesystem::path& path);

  std::optional<NliJudgment> find(std::string_view premise, std::string_view hypothesis) const;
  // Returns false if the pair was already present (existing entry kept).
  bool insert(std::string_view premise, std::string_view hypothesis, const NliJudgment& j);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  // Writes the whole cache (records sorted by digest) plus a provenance
  // sidecar at <path>.meta.json.
  void save(const std::filesystem::path& path) const;
  // Appends records to an existing JSONL file.
  static void append(const std::filesystem::path& path, std::span<const NliCacheRecord> records);

  static std::string record_to_line(const NliCacheRecord& r);

 private:
  using Key = std::pair<std::string, std::string>;
  std::map<Key, NliCacheRecord> entries_;
  std::string provenance_;
};

// Read-only provider over a precomputed cache. Missing pairs raise CacheMiss.
class FileNliProvider final : public NliProvider {
 public:
  explicit FileNliProvider(NliCache cache) : cache_(std::move(cache)) {}
  static FileNliProvider from_file(const std::filesystem::path& path);

  NliJudgment judge(std::string_view premise, std::string_view hypothesis) override;
  std::string identity() const override;

 private:
  NliCache cache_;
};

/// Deterministic rule-table oracle for tests and offline runs.
///
/// Resolution order for judge(p, h):
///   1. identical canonical texts -> entailment (1, 0, 0)
///   2. explicit (premise, hypothesis) rule
///   3. group membership: same group -> entailment, different groups ->
///      cross_group judgment when configured
///   4. the default judgment (neutral unless configured)
/// Steps 2 and 3 match the full text first and then the answer part of texts
/// of the form "Question: ... Answer: <answer>".
class MockNliProvider final : public NliProvider {
 public:
  MockNliProvider() = default;

  void add_rule(std::string premise, std::string hypothesis, NliJudgment j);
  void add_rule(std::string premise, std::string hypothesis, NliLabel label) {
    add_rule(std::move(premise), std::move(hypothesis), NliJudgment::one_hot(label));
  }
  void set_group(std::string text, std::string group);
  void set_cross_group(NliJudgment j) { cross_group_ = j; }
  void set_default(NliJudgment j) { default_ = j; }

  // JSON schema: {"default": label|[e,n,c], "cross_group": label|[e,n,c],
  //   "rules": [{"premise", "hypothesis", "label"|"p"}], "groups": {text: id}}
  static MockNliProvider from_json_text(std::string_view json_text);
  static MockNliProvider from_file(const std::filesystem::path& path);

  NliJudgment judge(std::string_view premise, std::string_view hypothesis) override;
  std::string identity() const override { return "mock:rule-table"; }

 private:
  std::optional<NliJudgment> lookup(const std::string& p, const std::string& h) const;

  std::map<std::pair<std::string, std::string>, NliJudgment> rules_;
  std::map<std::string, std::string> groups_;
  std::optional<NliJudgment> cross_group_;
  NliJudgment default_ = NliJudgment::one_hot(NliLabel::Neutral);
};

struct HttpNliOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8080 or http://host:port/prefix
  std::string model_id = "unknown";
  std::chrono::milliseconds timeout{30000};
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::size_t max_batch = 256;
};

/// Client for an inference service exposing POST {endpoint}/nli.
class HttpNliProvider final : public NliProvider {
 public:
  static constexpr double kResponseSumTolerance = 1e-3;

  explicit HttpNliProvider(HttpNliOptions options);

  NliJudgment judge(std::string_view premise, std::string_view hypothesis) override;
  std::vector<NliJudgment> judge_batch(std::span<const TextPair> pairs) override;
  std::string identity() const override;

  std::size_t requests_sent() const noexcept { return requests_.load(); }

 private:
  std::vector<NliJudgment> post_chunk(std::span<const TextPair> pairs);

  HttpNliOptions options_;
  std::string scheme_host_port_;
  std::string path_;
  std::atomic<std::size_t> requests_{0};
};

// Parses and validates a service response body. Probabilities whose sum is
// within kResponseSumTolerance of 1 are renormalized; anything else is an
// InvalidResponse error.
std::vector<NliJudgment> parse_nli_response(std::string_view body, std::size_t expected);

/// Write-through cache in front of another provider. Hits are served from
/// memory; misses go to the inner provider and are appended to the cache file
/// when one is configured.
class CachingNliProvider final : public NliProvider {
 public:
  CachingNliProvider(std::shared_ptr<NliProvider> inner, NliCache cache,
                     std::optional<std::filesystem::path> cache_path = std::nullopt);

  NliJudgment judge(std::string_view premise, std::string_view hypothesis) override;
  std::vector<NliJudgment> judge_batch(std::span<const TextPair> pairs) override;
  std::string identity() const override { return inner_->identity(); }

  // Single-writer population phase: judges every pair not already cached via
  // one inner judge_batch call. Returns the number of pairs sent.
  std::size_t populate(std::span<const TextPair> pairs);

  std::size_t inner_calls() const noexcept { return inner_calls_.load(); }
  std::size_t cache_size() const;

 private:
  std::shared_ptr<NliProvider> inner_;
  NliCache cache_;
  std::optional<std::filesystem::path> cache_path_;
  mutable std::shared_mutex mutex_;
  std::atomic<std::size_t> inner_calls_{0};
};

}  // namespace kle
