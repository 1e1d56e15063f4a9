#include "kle/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "kle/digest.hpp"
#include "kle/error.hpp"
#include "kle/eval.hpp"
#include "kle/format.hpp"

namespace kle {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kKnownFields{"id", "question", "answers", "token_logprobs", "correct",
                                         "low_temp_answer"};

// Runs fn(i) for i in [0, n) on `workers` threads. Results are stored by
// index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<QuestionRecord> read_all(const std::vector<fs::path>& inputs) {
  if (inputs.empty()) throw Error(ErrorCode::InvalidInput, "no input files given");
  std::vector<QuestionRecord> out;
  for (const auto& p : inputs) {
    auto recs = read_question_file(p);
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::InvalidInput, "cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out << text;
}

json input_digests(const std::vector<fs::path>& inputs) {
  json arr = json::array();
  for (const auto& p : inputs) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  return arr;
}

void write_manifest(const fs::path& dir, std::string_view command, const json& config, const json& seeds,
                    const std::string& provider, const json& inputs, const RunResult& result,
                    const json& extra = json::object()) {
  json m;
  m["schema_version"] = kSchemaVersion;
  m["tool"] = "kle";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = config;
  m["config_sha256"] = sha256_hex(config.dump());
  m["seeds"] = seeds;
  m["provider"] = provider;
  m["inputs"] = inputs;
  m["succeeded"] = result.succeeded;
  m["failed"] = result.failed;
  m["partial"] = result.failed > 0;
  m["exit_code"] = result.exit_code;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

bool is_provider_error(ErrorCode c) {
  return c == ErrorCode::ProviderUnavailable || c == ErrorCode::InvalidResponse || c == ErrorCode::CacheMiss;
}

int failure_exit_code(std::size_t ok, std::size_t failed, bool all_provider) {
  if (failed == 0) return kExitOk;
  if (ok == 0 && all_provider) return kExitProvider;
  return kExitPartial;
}

json error_record(const QuestionRecord& rec, const Error& e) {
  return {{"schema_version", kSchemaVersion},
          {"id", rec.answers.question_id},
          {"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
}

// Pre-pass over every ordered pair so that scoring reads the cache only.
void populate_cache(NliProvider& provider, const std::vector<QuestionRecord>& records,
                    const NliInputOptions& opts) {
  auto* caching = dynamic_cast<CachingNliProvider*>(&provider);
  if (caching == nullptr) return;
  std::vector<TextPair> pairs;
  for (const auto& r : records) {
    auto p = answer_pairs(r.answers, opts);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  caching->populate(pairs);
}

json scoring_options_json(const ScoringOptions& s) {
  json j;
  j["methods"] = s.methods;
  j["KLE_heat"] = s.heat.to_json();
  j["KLE_full"] = s.full.to_json();
  j["KLE_matern"] = s.matern.to_json();
  j["KLEc_heat"] = s.clusters_heat.to_json();
  j["scheme"] = to_string(s.scheme);
  j["nli_include_question"] = s.nli_input.include_question;
  j["full_cluster_probs"] = s.full_prob_mode ? json(to_string(*s.full_prob_mode)) : json("auto");
  return j;
}

json paths_json(const std::vector<fs::path>& paths) {
  json arr = json::array();
  for (const auto& p : paths) arr.push_back(p.string());
  return arr;
}

}  // namespace

QuestionRecord parse_question_record(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "record must be a JSON object");
  QuestionRecord rec;
  AnswerSet& a = rec.answers;
  try {
    a.question_id = j.at("id").get<std::string>();
    a.question = j.value("question", std::string());
    a.answers = j.at("answers").get<std::vector<std::string>>();
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
      a.token_logprobs = j["token_logprobs"].get<std::vector<std::vector<double>>>();
    }
    if (j.contains("correct") && !j["correct"].is_null()) a.correct = j["correct"].get<bool>();
    if (j.contains("low_temp_answer") && !j["low_temp_answer"].is_null()) {
      a.low_temp_answer = j["low_temp_answer"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, e.what());
  }
  a.validate();
  for (const auto& [k, v] : j.items()) {
    if (!kKnownFields.count(k)) rec.extra[k] = v;
  }
  return rec;
}

std::vector<QuestionRecord> read_question_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  std::vector<QuestionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (canonicalize_text(line).empty()) continue;
    try {
      out.push_back(parse_question_record(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json ProviderConfig::to_json() const {
  json j{{"kind", kind}, {"model_id", model_id}};
  if (cache_path) j["cache"] = cache_path->string();
  if (mock_rules) j["mock_rules"] = mock_rules->string();
  if (kind == "http") {
    j["endpoint"] = endpoint;
    j["timeout_ms"] = timeout_ms;
  }
  return j;
}

std::shared_ptr<NliProvider> make_provider(const ProviderConfig& cfg) {
  if (cfg.kind == "file") {
    if (!cfg.cache_path) throw Error(ErrorCode::InvalidInput, "file provider needs a cache path");
    return std::make_shared<FileNliProvider>(FileNliProvider::from_file(*cfg.cache_path));
  }
  std::shared_ptr<NliProvider> inner;
  if (cfg.kind == "mock") {
    inner = std::make_shared<MockNliProvider>(cfg.mock_rules ? MockNliProvider::from_file(*cfg.mock_rules)
                                                              : MockNliProvider());
  } else if (cfg.kind == "http") {
    if (cfg.endpoint.empty()) throw Error(ErrorCode::InvalidInput, "http provider needs an endpoint");
    HttpNliOptions opts;
    opts.endpoint = cfg.endpoint;
    opts.model_id = cfg.model_id;
    opts.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    inner = std::make_shared<HttpNliProvider>(opts);
  } else {
    throw Error(ErrorCode::InvalidInput, "unknown NLI provider '" + cfg.kind + "'");
  }
  if (!cfg.cache_path) return inner;
  NliCache cache = fs::exists(*cfg.cache_path) ? NliCache::load(*cfg.cache_path) : NliCache();
  return std::make_shared<CachingNliProvider>(inner, std::move(cache), *cfg.cache_path);
}

// ---------------------------------------------------------------------------
// score

json ScoreConfig::to_json() const {
  return {{"inputs", paths_json(inputs)},
          {"provider", provider.to_json()},
          {"scoring", scoring_options_json(scoring)},
          {"model", model},
          {"dataset", dataset},
          {"output_dir", output_dir.string()},
          {"workers", workers}};
}

RunResult run_score(const ScoreConfig& cfg) {
  RunResult result;
  const auto records = read_all(cfg.inputs);
  for (const auto& m : cfg.scoring.methods) {
    const auto& known = all_methods();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw Error(ErrorCode::InvalidInput, "unknown method '" + m + "'");
    }
  }
  cfg.scoring.heat.validate();
  cfg.scoring.full.validate();
  cfg.scoring.matern.validate();
  cfg.scoring.clusters_heat.validate();
  const std::string dataset = cfg.dataset.empty() ? cfg.inputs.front().stem().string() : cfg.dataset;

  auto provider = make_provider(cfg.provider);
  populate_cache(*provider, records, cfg.scoring.nli_input);

  std::vector<std::string> lines(records.size());
  std::vector<std::optional<ErrorCode>> failures(records.size());
  parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      const auto scores = score_answer_set(rec.answers, *provider, cfg.scoring);
      json out = scores.to_json();
      out.erase("kernels");
      out["schema_version"] = kSchemaVersion;
      out["id"] = rec.answers.question_id;
      out["model"] = cfg.model;
      out["dataset"] = dataset;
      out["n_answers"] = rec.answers.size();
      if (rec.answers.correct) out["correct"] = *rec.answers.correct;
      out["extra"] = rec.extra;
      lines[i] = out.dump();
    } catch (const Error& e) {
      failures[i] = e.code();
      lines[i] = error_record(rec, e).dump();
    }
  });

  bool all_provider = true;
  std::string body;
  for (std::size_t i = 0; i < records.size(); ++i) {
    body += lines[i];
    body += '\n';
    if (failures[i]) {
      ++result.failed;
      all_provider = all_provider && is_provider_error(*failures[i]);
      result.messages.push_back("record " + records[i].answers.question_id + " failed: " +
                                std::string(to_string(*failures[i])));
    } else {
      ++result.succeeded;
    }
  }
  result.exit_code = failure_exit_code(result.succeeded, result.failed, all_provider);

  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "scores.jsonl", body);
  write_manifest(cfg.output_dir, "score", cfg.to_json(), json::object(), provider->identity(),
                 input_digests(cfg.inputs), result);
  return result;
}

// ---------------------------------------------------------------------------
// cluster

json ClusterConfig::to_json() const {
  return {{"inputs", paths_json(inputs)},
          {"provider", provider.to_json()},
          {"nli_include_question", nli_input.include_question},
          {"output_dir", output_dir.string()},
          {"workers", workers}};
}

RunResult run_cluster(const ClusterConfig& cfg) {
  RunResult result;
  const auto records = read_all(cfg.inputs);
  auto provider = make_provider(cfg.provider);

  std::vector<std::string> lines(records.size());
  std::vector<std::optional<ErrorCode>> failures(records.size());
  parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      const Clustering c = bidirectional_cluster(rec.answers, *provider, cfg.nli_input);
      json clusters = json::array();
      for (std::size_t k = 0; k < c.num_clusters(); ++k) {
        json members = json::array();
        for (auto m : c.members(k)) members.push_back(rec.answers.answers[m]);
        clusters.push_back(members);
      }
      json out{{"schema_version", kSchemaVersion},
               {"id", rec.answers.question_id},
               {"num_clusters", c.num_clusters()},
               {"sizes", c.sizes()},
               {"assignment", c.assignment()},
               {"clusters", clusters},
               {"extra", rec.extra}};
      lines[i] = out.dump();
    } catch (const Error& e) {
      failures[i] = e.code();
      lines[i] = error_record(rec, e).dump();
    }
  });

  bool all_provider = true;
  std::string body;
  for (std::size_t i = 0; i < records.size(); ++i) {
    body += lines[i];
    body += '\n';
    if (failures[i]) {
      ++result.failed;
      all_provider = all_provider && is_provider_error(*failures[i]);
      result.messages.push_back("record " + records[i].answers.question_id + " failed: " +
                                std::string(to_string(*failures[i])));
    } else {
      ++result.succeeded;
    }
  }
  result.exit_code = failure_exit_code(result.succeeded, result.failed, all_provider);
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "clusters.jsonl", body);
  write_manifest(cfg.output_dir, "cluster", cfg.to_json(), json::object(), provider->identity(),
                 input_digests(cfg.inputs), result);
  return result;
}

// ---------------------------------------------------------------------------
// evaluate

json EvaluateConfig::to_json() const {
  return {{"inputs", paths_json(inputs)},
          {"resamples", resamples},
          {"seed", seed},
          {"threads", threads},
          {"output_dir", output_dir.string()}};
}

RunResult run_evaluate(const EvaluateConfig& cfg) {
  RunResult result;
  if (cfg.inputs.empty()) throw Error(ErrorCode::InvalidInput, "no scores files given");
  // (model, dataset) -> examples, in first-seen order
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<ScoredExample>> groups;
  json warnings = json::array();

  for (const auto& path : cfg.inputs) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (canonicalize_text(line).empty()) continue;
      const std::string where = path.string() + ":" + std::to_string(lineno);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, where + ": " + e.what());
      }
      if (j.contains("error")) {
        warnings.push_back(where + ": skipped failed record");
        continue;
      }
      if (!j.contains("correct") || !j["correct"].is_boolean()) {
        warnings.push_back(where + ": skipped record without a correctness label");
        continue;
      }
      ScoredExample ex;
      try {
        ex.question_id = j.at("id").get<std::string>();
        ex.correct = j["correct"].get<bool>();
        for (const auto& [name, v] : j.at("scores").items()) ex.scores[name] = v.get<double>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, where + ": " + e.what());
      }
      if (ex.scores.empty()) {
        warnings.push_back(where + ": skipped record without scores");
        continue;
      }
      const std::pair<std::string, std::string> key{j.value("model", std::string("unknown")),
                                                    j.value("dataset", path.stem().string())};
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(std::move(ex));
    }
  }

  std::vector<ScenarioReport> reports;
  for (const auto& key : order) {
    const auto& examples = groups[key];
    try {
      auto r = evaluate_scenario(key.first, key.second, examples, cfg.resamples, cfg.seed, cfg.threads);
      if (r.degenerate_labels) {
        warnings.push_back("scenario " + r.id() + ": DegenerateLabels, excluded from win rates");
      }
      reports.push_back(std::move(r));
      ++result.succeeded;
    } catch (const Error& e) {
      ++result.failed;
      warnings.push_back("scenario " + key.first + "/" + key.second + ": " + e.what());
    }
  }

  std::vector<ScenarioReport> usable;
  for (const auto& r : reports) {
    if (!r.degenerate_labels) usable.push_back(r);
  }
  json win_rates = json::object();
  for (MetricKind metric : {MetricKind::Auroc, MetricKind::Auarc}) {
    if (usable.empty()) break;
    try {
      win_rates[std::string(to_string(metric))] = win_rate(usable, metric).to_json();
    } catch (const Error& e) {
      warnings.push_back(std::string(to_string(metric)) + " win rates: " + e.what());
    }
  }

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["resamples"] = cfg.resamples;
  doc["seed"] = cfg.seed;
  doc["scenarios"] = json::array();
  for (const auto& r : reports) doc["scenarios"].push_back(r.to_json());
  doc["win_rates"] = win_rates;
  doc["warnings"] = warnings;

  for (const auto& w : warnings) result.messages.push_back(w.get<std::string>());
  result.exit_code = result.failed == 0 ? kExitOk : (result.succeeded == 0 ? kExitValidation : kExitPartial);

  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "reports.json", doc.dump(2) + "\n");
  std::ostringstream csv;
  write_reports_csv(csv, reports);
  write_text(cfg.output_dir / "reports.csv", csv.str());
  write_manifest(cfg.output_dir, "evaluate", cfg.to_json(), json{{"bootstrap", cfg.seed}}, "none",
                 input_digests(cfg.inputs), result);
  return result;
}

// ---------------------------------------------------------------------------
// ecp

json EcpConfig::to_json() const {
  return {{"vertex_counts", vertex_counts},
          {"family", to_string(family)},
          {"params", params},
          {"nu", nu},
          {"normalized_laplacian", normalized_laplacian},
          {"schedule", to_string(schedule)},
          {"seed", seed},
          {"collapse_threshold", collapse_threshold},
          {"select", select},
          {"output_dir", output_dir.string()}};
}

RunResult run_ecp(const EcpConfig& cfg) {
  if (cfg.family != KernelFamily::Heat && cfg.family != KernelFamily::Matern) {
    throw Error(ErrorCode::InvalidInput, "entropy convergence plots support heat and matern");
  }
  if (cfg.params.empty() || cfg.vertex_counts.empty()) {
    throw Error(ErrorCode::InvalidInput, "need at least one vertex count and one parameter value");
  }
  RunResult result;
  std::vector<ConvergenceCurve> curves;
  json selection = json::array();
  for (std::size_t n : cfg.vertex_counts) {
    std::vector<ConvergenceCurve> group;
    for (double p : cfg.params) {
      const KernelConfig k = cfg.family == KernelFamily::Heat
                                 ? KernelConfig::heat(p, cfg.normalized_laplacian)
                                 : KernelConfig::matern(cfg.nu, p, cfg.normalized_laplacian);
      group.push_back(entropy_convergence_curve(n, k, cfg.schedule, cfg.seed));
    }
    if (cfg.select && group.size() >= 2) {
      const double chosen = select_lengthscale(group, cfg.collapse_threshold);
      json collapsed = json::array();
      for (const auto& c : group) {
        if (collapses(c, cfg.collapse_threshold)) collapsed.push_back(c.param_value);
      }
      selection.push_back({{"n_vertices", n},
                           {"param_name", group.front().param_name},
                           {"selected", chosen},
                           {"collapsed", collapsed}});
      result.messages.push_back("selected " + group.front().param_name + "=" + format_double(chosen) +
                                " for n_vertices=" + std::to_string(n));
    }
    curves.insert(curves.end(), group.begin(), group.end());
    ++result.succeeded;
  }
  ensure_dir(cfg.output_dir);
  std::ostringstream csv;
  write_curves_csv(csv, curves);
  write_text(cfg.output_dir / "ecp.csv", csv.str());
  write_manifest(cfg.output_dir, "ecp", cfg.to_json(), json{{"edge_schedule", cfg.seed}}, "none",
                 json::array(), result, json{{"selection", selection}});
  return result;
}

}  // namespace kle
