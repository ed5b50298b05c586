#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsadvisor/metric_schema.hpp"
#include "gsadvisor/predictor.hpp"
#include "gsadvisor/selector.hpp"
#include "gsadvisor/synthetic_oracle.hpp"
#include "json.hpp"

namespace gsadvisor::cli {

inline constexpr std::string_view kDefaultMetrics = "kid:lower,clip:higher,image_reward:higher,fid:lower";

// Everything a command needs. Relative paths are resolved against the
// directory of the config file.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string metrics = std::string(kDefaultMetrics);

  struct Paths {
    std::filesystem::path prompts;
    std::filesystem::path embeddings;  // optional emb.v1 file
    std::filesystem::path dataset;
    std::filesystem::path model;
    std::filesystem::path selection;
    std::filesystem::path select_prompts;  // defaults to prompts
    std::filesystem::path evaluation;
    std::filesystem::path eval_prompts;
    std::filesystem::path eval_dataset;  // labeled sweep used as ground truth
    std::filesystem::path report;
    std::filesystem::path journal;       // optional sweep journal directory
    std::filesystem::path lexicon;
  } paths;

  struct Sweep {
    std::vector<double> grid = ScaleGrid::image_default().scales();
    std::size_t samples_per_pair = 16;
    std::size_t workers = 1;
    std::size_t max_retries = 2;
    std::string provider = "synthetic";
    std::int64_t connect_timeout_ms = 2000;
    std::int64_t read_timeout_ms = 30000;
  } sweep;

  struct Synthetic {
    double omega_min = 2.0;
    double omega_max = 10.0;
    double noise_std = 0.1;
    std::vector<double> peak_heights;  // empty: built-in defaults
    std::vector<double> curvatures;
    std::vector<double> offsets;
    double length_floor = 2.0;
    double length_saturation = 24.0;
    double modifier_saturation = 0.5;
    double length_weight = 0.75;
  } synthetic;

  struct Train {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden = kDefaultHiddenSizes;
    std::size_t complexity_dim = kDefaultComplexityDim;
    int lm_order = 3;
    double lm_smoothing = 0.1;
  } train;

  struct Utility {
    double alpha = kDefaultAlpha;
    double anchor = kImageDefaultAnchor;
    std::vector<double> weights;  // empty: uniform
  } utility;

  struct Embedding {
    std::size_t hashed_dim = kDefaultHashedEmbeddingDim;
    bool fallback = true;
  } embedding;

  struct Evaluate {
    std::string truth = "synthetic";  // or "dataset"
    std::vector<std::string> subset;  // ablation metrics; empty disables
  } evaluate;

  struct Prompts {
    std::size_t count = 2000;
    std::size_t first_index = 0;
  } prompts;

  std::optional<std::filesystem::path> out;  // --out, replaces the command's primary output

  MetricSchema metric_schema() const { return MetricSchema::parse(metrics); }
  ScaleGrid grid() const { return ScaleGrid(sweep.grid); }
  SyntheticOracleParams synthetic_params() const;
  UtilityConfig utility_config() const;
  TrainConfig train_config() const;
};

// Parses "key = value" lines grouped under [section] headers; '#' starts a
// comment. Values are JSON literals (numbers, "strings", [arrays], true/false)
// or bare words. Unknown keys are errors.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> grid;
  std::optional<double> alpha;
  std::optional<double> anchor;
  std::optional<std::string> provider;
  std::optional<std::filesystem::path> out;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

// Comma-separated list of scales, e.g. "1,2,3.5".
std::vector<double> parse_grid(std::string_view text);

// Fully resolved configuration, as recorded in run manifests.
nlohmann::json to_json(const RunConfig& config);

}  // namespace gsadvisor::cli
