#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "kle/error.hpp"
#include "kle/nli.hpp"

namespace kle {

using nlohmann::json;

namespace {

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidInput, "NLI endpoint must include a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string path = endpoint.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {endpoint.substr(0, path_start), path};
}

}  // namespace

std::vector<NliJudgment> parse_nli_response(std::string_view body, std::size_t expected) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("judgments") || !j["judgments"].is_array()) {
    throw Error(ErrorCode::InvalidResponse, "response lacks a \"judgments\" array");
  }
  const auto& arr = j["judgments"];
  if (arr.size() != expected) {
    std::ostringstream os;
    os << "expected " << expected << " judgments, got " << arr.size();
    throw Error(ErrorCode::InvalidResponse, os.str());
  }
  std::vector<NliJudgment> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& r = arr[i];
    double p[3];
    try {
      p[0] = r.at("entail").get<double>();
      p[1] = r.at("neutral").get<double>();
      p[2] = r.at("contra").get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidResponse, "judgment " + std::to_string(i) + ": " + e.what());
    }
    double sum = 0.0;
    for (double x : p) {
      if (!std::isfinite(x) || x < 0.0) {
        throw Error(ErrorCode::InvalidResponse, "judgment " + std::to_string(i) + " has invalid probability");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > HttpNliProvider::kResponseSumTolerance) {
      std::ostringstream os;
      os << "judgment " << i << " probabilities sum to " << sum;
      throw Error(ErrorCode::InvalidResponse, os.str());
    }
    out.emplace_back(p[0] / sum, p[1] / sum, p[2] / sum);
  }
  return out;
}

HttpNliProvider::HttpNliProvider(HttpNliOptions options) : options_(std::move(options)) {
  std::tie(scheme_host_port_, path_) = split_endpoint(options_.endpoint);
  if (options_.attempts < 1) options_.attempts = 1;
  if (options_.max_batch < 1) options_.max_batch = 1;
}

std::string HttpNliProvider::identity() const {
  return "http:" + options_.endpoint + "#" + options_.model_id;
}

NliJudgment HttpNliProvider::judge(std::string_view premise, std::string_view hypothesis) {
  const TextPair pair{std::string(premise), std::string(hypothesis)};
  return judge_batch(std::span(&pair, 1)).front();
}

std::vector<NliJudgment> HttpNliProvider::judge_batch(std::span<const TextPair> pairs) {
  std::vector<NliJudgment> out;
  out.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += options_.max_batch) {
    const auto chunk = pairs.subspan(start, std::min(options_.max_batch, pairs.size() - start));
    try {
      auto judged = post_chunk(chunk);
      out.insert(out.end(), judged.begin(), judged.end());
    } catch (const Error& e) {
      throw Error(e.code(), "pairs starting at index " + std::to_string(start) + ": " + e.what());
    }
  }
  return out;
}

std::vector<NliJudgment> HttpNliProvider::post_chunk(std::span<const TextPair> pairs) {
  json body;
  body["pairs"] = json::array();
  for (const auto& p : pairs) {
    if (canonicalize_text(p.premise).empty() || canonicalize_text(p.hypothesis).empty()) {
      throw Error(ErrorCode::InvalidInput, "NLI texts must be non-empty after trimming");
    }
    body["pairs"].push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
  }
  const std::string payload = body.dump();
  const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto timeout_us =
      std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - timeout_s);

  std::string last_failure;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_s.count(), timeout_us.count());
    client.set_read_timeout(timeout_s.count(), timeout_us.count());
    client.set_write_timeout(timeout_s.count(), timeout_us.count());
    ++requests_;
    auto res = client.Post(path_ + "/nli", payload, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ProviderUnavailable, "HTTP " + std::to_string(res->status));
    }
    return parse_nli_response(res->body, pairs.size());
  }
  throw Error(ErrorCode::ProviderUnavailable,
              "gave up after " + std::to_string(options_.attempts) + " attempts (" + last_failure + ")");
}

}  // namespace kle
