#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsadvisor/featurizer.hpp"
#include "gsadvisor/metric_schema.hpp"
#include "gsadvisor/predictor.hpp"
#include "gsadvisor/prompts.hpp"
#include "gsadvisor/provider.hpp"
#include "gsadvisor/selector.hpp"
#include "json.hpp"

namespace gsadvisor {

struct SweepPlan {
  std::vector<PromptRecord> prompts;
  ScaleGrid grid = ScaleGrid::image_default();
  std::size_t samples_per_pair = 16;
  std::uint64_t seed_base = 0;
  MetricSchema schema;

  std::size_t total_pairs() const { return prompts.size() * grid.size(); }
  // |P| * |S| * N_g
  std::size_t total_work() const { return total_pairs() * samples_per_pair; }
};

struct SweepRecord {
  std::string prompt_id;
  double scale = 0.0;
  Eigen::MatrixXd per_sample;  // N_g x d_q, raw orientation
  QualityVector aggregate;     // oriented column mean
  nlohmann::json provider_meta;
};

// Orients each sample (negating lower-better metrics) and averages.
SweepRecord make_record(std::string prompt_id, double scale, Eigen::MatrixXd per_sample, const MetricSchema& schema,
                        nlohmann::json meta = {});

struct SweepFailure {
  std::string prompt_id;
  double scale = 0.0;
  std::size_t attempts = 0;
  std::string reason;
};

struct SweepReport {
  std::size_t total_pairs = 0;
  std::size_t total_work = 0;
  std::size_t completed = 0;  // pairs scored in this run
  std::size_t resumed = 0;    // pairs taken from the journal
  bool interrupted = false;
  std::vector<SweepFailure> failures;
  double elapsed_seconds = 0.0;
  double mean_pair_seconds = 0.0;
};

struct SweepOptions {
  std::size_t workers = 1;
  std::size_t max_retries = 2;  // attempts = 1 + max_retries
  std::optional<std::filesystem::path> journal_dir;
  // Stop after this many newly scored pairs (simulates an interrupted run).
  std::optional<std::size_t> stop_after;
  std::function<void(const std::string&)> log;
};

struct SweepOutput {
  std::vector<SweepRecord> records;  // sorted by (prompt_id, scale)
  SweepReport report;
};

// Scores every (prompt, scale) pair. Failed pairs are retried, then reported
// and omitted. With a journal directory, completed pairs survive restarts:
// records go to records.jsonl and "{id}\t{scale}\tdone" lines to journal.tsv.
SweepOutput run_sweep(const SweepPlan& plan, QualityProvider& provider, const SweepOptions& options = {});

// Shortest round-trip decimal form used in journal lines.
std::string format_scale(double scale);

// ---------------------------------------------------------------------------
// Dataset files (sweep.v1)

inline constexpr std::string_view kSweepSchema = "sweep.v1";

struct SweepDataset {
  MetricSchema schema;
  std::size_t n_g = 0;
  std::vector<SweepRecord> records;
};

// Throws OrientationConflict if a record's aggregate is not the oriented mean
// of its samples.
void write_dataset(std::span<const SweepRecord> records, const MetricSchema& schema, std::size_t n_g,
                   const std::filesystem::path& path);
SweepDataset read_dataset(const std::filesystem::path& path);

// Dataset rows joined with prompt text and featurized. Throws FormatError for
// rows whose prompt id is missing from `prompts`.
TrainingSet make_training_set(const SweepDataset& dataset, std::span<const PromptRecord> prompts,
                              const PromptFeaturizer& featurizer);

}  // namespace gsadvisor
