#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "gsadvisor/featurizer.hpp"
#include "gsadvisor/metric_schema.hpp"
#include "gsadvisor/prompts.hpp"
#include "gsadvisor/synthetic_oracle.hpp"
#include "json.hpp"

namespace gsadvisor {

struct PairScores {
  Eigen::MatrixXd raw;  // samples x d_q, raw metric orientation, schema order
  nlohmann::json meta;  // provenance: seeds, artifact references
};

// Generates and scores N_g samples for one (prompt, scale) pair. Implementations
// must be safe to call concurrently for different pairs.
class QualityProvider {
 public:
  virtual ~QualityProvider() = default;

  virtual std::string describe() const = 0;

  // Throws ProviderUnreachable when the backing service cannot be contacted.
  virtual void check_reachable() {}

  // Retryable failures: Timeout, MalformedResponse, HTTPStatus, ProviderUnreachable.
  // ScoreSchemaMismatch is fatal for the sweep.
  virtual PairScores score_pair(const PromptRecord& prompt, double scale, std::uint64_t seed_base,
                                std::size_t samples, const MetricSchema& schema) = 0;
};

// In-process synthetic oracle. Sample j uses sample_seed(seed_base, id, scale, j).
class SyntheticProvider final : public QualityProvider {
 public:
  SyntheticProvider(SyntheticOracleParams params, const PromptFeaturizer& featurizer);

  std::string describe() const override { return "synthetic"; }
  PairScores score_pair(const PromptRecord& prompt, double scale, std::uint64_t seed_base, std::size_t samples,
                        const MetricSchema& schema) override;

  const SyntheticOracleParams& params() const { return params_; }

 private:
  SyntheticOracleParams params_;
  const PromptFeaturizer& featurizer_;
};

struct HttpClientOptions {
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{30000};
};

// JSON-over-HTTP client for the generate/score service.
class ProviderClient {
 public:
  explicit ProviderClient(std::string endpoint, HttpClientOptions options = {});

  const std::string& endpoint() const { return endpoint_; }

  // POSTs a JSON body and returns the parsed JSON response. Throws
  // ProviderUnreachable, Timeout, HTTPStatus (>= 400, message carries the body),
  // or MalformedResponse.
  nlohmann::json call(const std::string& path, const nlohmann::json& request) const;

  // Any HTTP response counts as reachable.
  bool reachable() const;

 private:
  std::string endpoint_;
  HttpClientOptions options_;
};

// Provider backed by POST /generate and POST /score. Request ids are derived
// from (seed_base, prompt id, scale) so retries replay the same ids.
class HttpProvider final : public QualityProvider {
 public:
  explicit HttpProvider(std::string endpoint, HttpClientOptions options = {});

  std::string describe() const override { return client_.endpoint(); }
  void check_reachable() override;
  PairScores score_pair(const PromptRecord& prompt, double scale, std::uint64_t seed_base, std::size_t samples,
                        const MetricSchema& schema) override;

 private:
  ProviderClient client_;
};

}  // namespace gsadvisor
