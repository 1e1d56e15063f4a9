#include "kle/nli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kle/digest.hpp"
#include "kle/error.hpp"

namespace kle {

using nlohmann::json;

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::Entailment: return "entailment";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradiction: return "contradiction";
  }
  return "neutral";
}

NliLabel parse_nli_label(std::string_view s) {
  if (s == "entailment" || s == "entail") return NliLabel::Entailment;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradiction" || s == "contra") return NliLabel::Contradiction;
  throw Error(ErrorCode::InvalidInput, "unknown NLI label '" + std::string(s) + "'");
}

NliJudgment::NliJudgment(double p_entail, double p_neutral, double p_contra)
    : p_{p_entail, p_neutral, p_contra} {
  double sum = 0.0;
  for (double p : p_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::InvalidProbs, "NLI probabilities must be finite and nonnegative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os << "NLI probabilities sum to " << sum;
    throw Error(ErrorCode::InvalidProbs, os.str());
  }
}

NliJudgment NliJudgment::one_hot(NliLabel label) {
  switch (label) {
    case NliLabel::Entailment: return {1.0, 0.0, 0.0};
    case NliLabel::Neutral: return {0.0, 1.0, 0.0};
    case NliLabel::Contradiction: return {0.0, 0.0, 1.0};
  }
  return {0.0, 1.0, 0.0};
}

NliLabel NliJudgment::label() const noexcept {
  // strict comparisons keep the earlier label on ties
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (p_[k] > p_[best]) best = k;
  }
  return static_cast<NliLabel>(best);
}

std::string canonicalize_text(std::string_view text) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return std::string(text.substr(first, last - first + 1));
}

std::string text_digest(std::string_view text) { return sha256_hex(canonicalize_text(text)); }

std::vector<NliJudgment> NliProvider::judge_batch(std::span<const TextPair> pairs) {
  std::vector<NliJudgment> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      out.push_back(judge(pairs[i].premise, pairs[i].hypothesis));
    } catch (const Error& e) {
      throw Error(e.code(), "pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// NliCache

namespace {

void require_nonempty(std::string_view premise, std::string_view hypothesis) {
  if (canonicalize_text(premise).empty() || canonicalize_text(hypothesis).empty()) {
    throw Error(ErrorCode::InvalidInput, "NLI texts must be non-empty after trimming");
  }
}

NliJudgment judgment_from_json(const json& j) {
  if (j.is_string()) return NliJudgment::one_hot(parse_nli_label(j.get<std::string>()));
  if (j.is_array() && j.size() == 3) {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  }
  throw Error(ErrorCode::InvalidInput, "judgment must be a label or [e, n, c]");
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

NliCache NliCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open NLI cache " + path.string());
  NliCache cache;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (canonicalize_text(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const auto premise = j.at("premise").get<std::string>();
      const auto hypothesis = j.at("hypothesis").get<std::string>();
      const auto& p = j.at("p");
      if (!p.is_array() || p.size() != 3) throw Error(ErrorCode::InvalidInput, "\"p\" must have 3 entries");
      if (j.at("premise_sha").get<std::string>() != text_digest(premise) ||
          j.at("hypothesis_sha").get<std::string>() != text_digest(hypothesis)) {
        throw Error(ErrorCode::InvalidInput, "digest does not match text");
      }
      cache.insert(premise, hypothesis,
                   NliJudgment(p[0].get<double>(), p[1].get<double>(), p[2].get<double>()));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidInput,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  const auto meta = meta_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream min(meta);
    const json m = json::parse(min, nullptr, false);
    if (m.is_object() && m.contains("provenance")) cache.provenance_ = m["provenance"].get<std::string>();
  }
  return cache;
}

std::optional<NliJudgment> NliCache::find(std::string_view premise, std::string_view hypothesis) const {
  const auto it = entries_.find({text_digest(premise), text_digest(hypothesis)});
  if (it == entries_.end()) return std::nullopt;
  return it->second.judgment;
}

bool NliCache::insert(std::string_view premise, std::string_view hypothesis, const NliJudgment& j) {
  Key key{text_digest(premise), text_digest(hypothesis)};
  return entries_
      .try_emplace(std::move(key),
                   NliCacheRecord{canonicalize_text(premise), canonicalize_text(hypothesis), j})
      .second;
}

std::string NliCache::record_to_line(const NliCacheRecord& r) {
  json j;
  j["premise_sha"] = text_digest(r.premise);
  j["hypothesis_sha"] = text_digest(r.hypothesis);
  j["premise"] = r.premise;
  j["hypothesis"] = r.hypothesis;
  j["p"] = {r.judgment.p_entail(), r.judgment.p_neutral(), r.judgment.p_contra()};
  return j.dump();
}

void NliCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write NLI cache " + path.string());
  for (const auto& [key, rec] : entries_) out << record_to_line(rec) << '\n';
  std::ofstream meta(meta_path(path), std::ios::trunc);
  meta << json{{"schema_version", 1}, {"provenance", provenance_}}.dump(2) << '\n';
}

void NliCache::append(const std::filesystem::path& path, std::span<const NliCacheRecord> records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot append to NLI cache " + path.string());
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// FileNliProvider

FileNliProvider FileNliProvider::from_file(const std::filesystem::path& path) {
  return FileNliProvider(NliCache::load(path));
}

NliJudgment FileNliProvider::judge(std::string_view premise, std::string_view hypothesis) {
  require_nonempty(premise, hypothesis);
  if (auto j = cache_.find(premise, hypothesis)) return *j;
  throw Error(ErrorCode::CacheMiss, "no cached judgment for pair (" + text_digest(premise).substr(0, 12) +
                                        ", " + text_digest(hypothesis).substr(0, 12) + ")");
}

std::string FileNliProvider::identity() const {
  return "file:" + (cache_.provenance().empty() ? std::string("unknown") : cache_.provenance());
}

// ---------------------------------------------------------------------------
// MockNliProvider

namespace {

constexpr std::string_view kQuestionPrefix = "Question: ";
constexpr std::string_view kAnswerMarker = " Answer: ";

std::optional<std::string> answer_part(const std::string& text) {
  if (text.rfind(kQuestionPrefix, 0) != 0) return std::nullopt;
  const auto pos = text.find(kAnswerMarker);
  if (pos == std::string::npos) return std::nullopt;
  return canonicalize_text(std::string_view(text).substr(pos + kAnswerMarker.size()));
}

}  // namespace

void MockNliProvider::add_rule(std::string premise, std::string hypothesis, NliJudgment j) {
  rules_.insert_or_assign({canonicalize_text(premise), canonicalize_text(hypothesis)}, j);
}

void MockNliProvider::set_group(std::string text, std::string group) {
  groups_.insert_or_assign(canonicalize_text(text), std::move(group));
}

MockNliProvider MockNliProvider::from_json_text(std::string_view json_text) {
  MockNliProvider mock;
  try {
    const json j = json::parse(json_text);
    if (j.contains("default")) mock.set_default(judgment_from_json(j["default"]));
    if (j.contains("cross_group")) mock.set_cross_group(judgment_from_json(j["cross_group"]));
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) {
        const json& value = r.contains("p") ? r["p"] : r.at("label");
        mock.add_rule(r.at("premise").get<std::string>(), r.at("hypothesis").get<std::string>(),
                      judgment_from_json(value));
      }
    }
    if (j.contains("groups")) {
      for (const auto& [text, group] : j["groups"].items()) mock.set_group(text, group.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("mock rule table: ") + e.what());
  }
  return mock;
}

MockNliProvider MockNliProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open mock rule table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::optional<NliJudgment> MockNliProvider::lookup(const std::string& p, const std::string& h) const {
  if (auto it = rules_.find({p, h}); it != rules_.end()) return it->second;
  const auto gp = groups_.find(p);
  const auto gh = groups_.find(h);
  if (gp != groups_.end() && gh != groups_.end()) {
    if (gp->second == gh->second) return NliJudgment::one_hot(NliLabel::Entailment);
    if (cross_group_) return *cross_group_;
  }
  return std::nullopt;
}

NliJudgment MockNliProvider::judge(std::string_view premise, std::string_view hypothesis) {
  require_nonempty(premise, hypothesis);
  const std::string p = canonicalize_text(premise);
  const std::string h = canonicalize_text(hypothesis);
  if (p == h) return NliJudgment::one_hot(NliLabel::Entailment);
  if (auto j = lookup(p, h)) return *j;
  const auto ap = answer_part(p);
  const auto ah = answer_part(h);
  if (ap || ah) {
    const std::string& p2 = ap ? *ap : p;
    const std::string& h2 = ah ? *ah : h;
    if (p2 == h2) return NliJudgment::one_hot(NliLabel::Entailment);
    if (auto j = lookup(p2, h2)) return *j;
  }
  return default_;
}

// ---------------------------------------------------------------------------
// CachingNliProvider

CachingNliProvider::CachingNliProvider(std::shared_ptr<NliProvider> inner, NliCache cache,
                                       std::optional<std::filesystem::path> cache_path)
    : inner_(std::move(inner)), cache_(std::move(cache)), cache_path_(std::move(cache_path)) {
  if (cache_.provenance().empty()) cache_.set_provenance(inner_->identity());
  if (cache_path_ && !std::filesystem::exists(meta_path(*cache_path_))) {
    std::ofstream meta(meta_path(*cache_path_), std::ios::trunc);
    meta << json{{"schema_version", 1}, {"provenance", cache_.provenance()}}.dump(2) << '\n';
  }
}

std::size_t CachingNliProvider::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

NliJudgment CachingNliProvider::judge(std::string_view premise, std::string_view hypothesis) {
  require_nonempty(premise, hypothesis);
  {
    std::shared_lock lock(mutex_);
    if (auto j = cache_.find(premise, hypothesis)) return *j;
  }
  const NliJudgment j = inner_->judge(premise, hypothesis);
  ++inner_calls_;
  std::unique_lock lock(mutex_);
  if (cache_.insert(premise, hypothesis, j) && cache_path_) {
    const NliCacheRecord rec{canonicalize_text(premise), canonicalize_text(hypothesis), j};
    NliCache::append(*cache_path_, std::span(&rec, 1));
  }
  return j;
}

std::vector<NliJudgment> CachingNliProvider::judge_batch(std::span<const TextPair> pairs) {
  populate(pairs);
  std::vector<NliJudgment> out;
  out.reserve(pairs.size());
  std::shared_lock lock(mutex_);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto j = cache_.find(pairs[i].premise, pairs[i].hypothesis);
    if (!j) throw Error(ErrorCode::CacheMiss, "pair " + std::to_string(i) + " missing after population");
    out.push_back(*j);
  }
  return out;
}

std::size_t CachingNliProvider::populate(std::span<const TextPair> pairs) {
  std::vector<TextPair> missing;
  {
    std::shared_lock lock(mutex_);
    std::map<std::pair<std::string, std::string>, bool> seen;
    for (const auto& p : pairs) {
      require_nonempty(p.premise, p.hypothesis);
      const std::string cp = canonicalize_text(p.premise);
      const std::string ch = canonicalize_text(p.hypothesis);
      if (cache_.find(cp, ch)) continue;
      if (seen.emplace(std::make_pair(cp, ch), true).second) missing.push_back({cp, ch});
    }
  }
  if (missing.empty()) return 0;
  const auto judged = inner_->judge_batch(missing);
  inner_calls_ += missing.size();
  std::unique_lock lock(mutex_);
  std::vector<NliCacheRecord> fresh;
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (cache_.insert(missing[i].premise, missing[i].hypothesis, judged[i])) {
      fresh.push_back({missing[i].premise, missing[i].hypothesis, judged[i]});
    }
  }
  if (cache_path_ && !fresh.empty()) NliCache::append(*cache_path_, fresh);
  return missing.size();
}

}  // namespace kle
