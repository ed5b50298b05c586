#include "gsadvisor/provider.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "gsadvisor/error.hpp"
#include "gsadvisor/hashing.hpp"
#include "httplib.h"

namespace gsadvisor {
namespace {

using nlohmann::json;

std::string hex_id(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

template <typename Rep, typename Period>
std::pair<time_t, time_t> split(std::chrono::duration<Rep, Period> d) {
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(d).count();
  return {static_cast<time_t>(us / 1000000), static_cast<time_t>(us % 1000000)};
}

}  // namespace

SyntheticProvider::SyntheticProvider(SyntheticOracleParams params, const PromptFeaturizer& featurizer)
    : params_(std::move(params)), featurizer_(featurizer) {}

PairScores SyntheticProvider::score_pair(const PromptRecord& prompt, double scale, std::uint64_t seed_base,
                                         std::size_t samples, const MetricSchema& schema) {
  params_.validate(schema.size());
  const ComplexityFeatures features = featurizer_.complexity(prompt);
  PairScores out;
  out.raw.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(schema.size()));
  json seeds = json::array();
  for (std::size_t j = 0; j < samples; ++j) {
    const std::uint64_t seed = sample_seed(seed_base, prompt.id, scale, j);
    out.raw.row(static_cast<Eigen::Index>(j)) = synthetic_generate_score(params_, schema, features, scale, seed);
    seeds.push_back(hex_id(seed));
  }
  out.meta = {{"provider", "synthetic"}, {"seeds", seeds}};
  return out;
}

// ---------------------------------------------------------------------------

ProviderClient::ProviderClient(std::string endpoint, HttpClientOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  if (endpoint_.rfind("http://", 0) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "provider endpoint must start with http://, got '" + endpoint_ + "'");
  }
}

json ProviderClient::call(const std::string& path, const json& request) const {
  httplib::Client cli(endpoint_);
  const auto [cs, cus] = split(options_.connect_timeout);
  const auto [rs, rus] = split(options_.read_timeout);
  cli.set_connection_timeout(cs, cus);
  cli.set_read_timeout(rs, rus);
  cli.set_write_timeout(rs, rus);

  auto res = cli.Post(path, request.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = endpoint_ + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::kTimeout, what);
    }
    throw Error(ErrorCode::kProviderUnreachable, what);
  }
  if (res->status >= 400) {
    std::string detail = res->body;
    try {
      const auto body = json::parse(res->body);
      if (body.is_object() && body.contains("error") && body["error"].is_string()) {
        detail = body["error"].get<std::string>();
      }
    } catch (const json::parse_error&) {
    }
    throw Error(ErrorCode::kHttpStatus, endpoint_ + path + " returned " + std::to_string(res->status) + ": " + detail);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedResponse, endpoint_ + path + ": " + e.what());
  }
}

bool ProviderClient::reachable() const {
  httplib::Client cli(endpoint_);
  const auto [cs, cus] = split(options_.connect_timeout);
  cli.set_connection_timeout(cs, cus);
  cli.set_read_timeout(cs, cus);
  return static_cast<bool>(cli.Get("/"));
}

HttpProvider::HttpProvider(std::string endpoint, HttpClientOptions options) : client_(std::move(endpoint), options) {}

void HttpProvider::check_reachable() {
  if (!client_.reachable()) throw Error(ErrorCode::kProviderUnreachable, "cannot connect to " + client_.endpoint());
}

PairScores HttpProvider::score_pair(const PromptRecord& prompt, double scale, std::uint64_t seed_base,
                                    std::size_t samples, const MetricSchema& schema) {
  const std::string request_id =
      hex_id(StableHasher{}.add(seed_base).add(prompt.id).add(scale).add(std::string_view("generate")).digest());

  const json generated = client_.call("/generate", {{"request_id", request_id},
                                                    {"prompt", prompt.text},
                                                    {"scale", scale},
                                                    {"seed", sample_seed(seed_base, prompt.id, scale, 0)},
                                                    {"n", samples}});
  if (!generated.is_object() || !generated.contains("artifacts") || !generated["artifacts"].is_array()) {
    throw Error(ErrorCode::kMalformedResponse, "/generate response lacks an artifacts array");
  }
  const auto& artifacts = generated["artifacts"];
  if (artifacts.size() != samples) {
    throw Error(ErrorCode::kMalformedResponse, "/generate returned " + std::to_string(artifacts.size()) +
                                                   " artifacts, requested " + std::to_string(samples));
  }

  const std::set<std::string> expected(schema.names().begin(), schema.names().end());
  PairScores out;
  out.raw.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t j = 0; j < samples; ++j) {
    if (!artifacts[j].is_string()) throw Error(ErrorCode::kMalformedResponse, "artifact references must be strings");
    const json scored = client_.call("/score", {{"request_id", request_id + "-" + std::to_string(j)},
                                                {"artifact", artifacts[j]},
                                                {"prompt", prompt.text},
                                                {"metrics", schema.names()}});
    if (!scored.is_object() || !scored.contains("scores") || !scored["scores"].is_object()) {
      throw Error(ErrorCode::kMalformedResponse, "/score response lacks a scores object");
    }
    const auto& scores = scored["scores"];
    std::set<std::string> returned;
    for (const auto& [name, value] : scores.items()) returned.insert(name);
    if (returned != expected) {
      std::string names;
      for (const auto& n : returned) names += (names.empty() ? "" : ",") + n;
      throw Error(ErrorCode::kScoreSchemaMismatch,
                  "scorer returned metrics {" + names + "}, schema is {" + schema.to_spec() + "}");
    }
    for (std::size_t m = 0; m < schema.size(); ++m) {
      const auto& v = scores[schema.names()[m]];
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw Error(ErrorCode::kMalformedResponse, "score for " + schema.names()[m] + " is not a finite number");
      }
      out.raw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = v.get<double>();
    }
  }
  out.meta = {{"provider", "http"}, {"request_id", request_id}, {"artifacts", artifacts}};
  return out;
}

}  // namespace gsadvisor
