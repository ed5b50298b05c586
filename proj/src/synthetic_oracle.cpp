#include "gsadvisor/synthetic_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "gsadvisor/error.hpp"
#include "gsadvisor/random.hpp"

namespace gsadvisor {
namespace {

constexpr std::array<std::string_view, 60> kNouns = {
    "car",      "dog",     "cat",     "horse",    "bicycle", "train",    "bus",      "boat",     "plate",
    "bowl",     "table",   "chair",   "window",   "street",  "city",     "mountain", "river",    "beach",
    "tree",     "flower",  "garden",  "kitchen",  "bedroom", "clock",    "umbrella", "kite",     "pizza",
    "sandwich", "banana",  "apple",   "orange",   "peach",   "cake",     "cup",      "bottle",   "vase",
    "laptop",   "phone",   "book",    "lamp",     "sofa",    "bird",     "giraffe",  "elephant", "zebra",
    "sheep",    "cow",     "man",     "woman",    "child",   "player",   "skier",    "surfer",   "bench",
    "tower",    "bridge",  "field",   "airplane", "truck",   "building"};

constexpr std::array<std::string_view, 6> kDeterminers = {"a", "the", "two", "three", "some", "one"};

constexpr std::array<std::string_view, 10> kConnectors = {"with", "and", "on", "in", "near",
                                                          "under", "beside", "behind", "of", "by"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return items[static_cast<std::size_t>(rng.below(N))];
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

SyntheticOracleParams SyntheticOracleParams::defaults(std::size_t d_q) {
  if (d_q == 0) throw Error(ErrorCode::kInvalidArgument, "synthetic oracle needs at least one metric");
  static constexpr std::array<double, 4> kHeights = {1.0, 0.8, 0.9, 1.1};
  static constexpr std::array<double, 4> kCurvatures = {1.0, 0.8, 1.2, 1.0};
  SyntheticOracleParams p;
  const auto n = static_cast<Eigen::Index>(d_q);
  p.peak_heights.resize(n);
  p.curvatures.resize(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    p.peak_heights[m] = kHeights[static_cast<std::size_t>(m) % kHeights.size()];
    p.curvatures[m] = kCurvatures[static_cast<std::size_t>(m) % kCurvatures.size()];
  }
  p.offsets = Eigen::VectorXd::Zero(n);
  return p;
}

void SyntheticOracleParams::validate(std::size_t d_q) const {
  const auto n = static_cast<Eigen::Index>(d_q);
  if (peak_heights.size() != n || curvatures.size() != n || offsets.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "synthetic oracle parameters do not match the metric count");
  }
  if (!peak_heights.allFinite() || !curvatures.allFinite() || !offsets.allFinite() ||
      (curvatures.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic curvatures must be positive and all parameters finite");
  }
  if (!(omega_min > 0.0) || !(omega_max >= omega_min) || !std::isfinite(omega_max)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic optimum range must satisfy 0 < omega_min <= omega_max");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_std must be >= 0");
  }
  if (!(length_saturation > length_floor) || !(modifier_saturation > 0.0) || !(length_weight >= 0.0) ||
      !(length_weight <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid complexity map parameters");
  }
}

double complexity_map(const SyntheticOracleParams& params, const ComplexityFeatures& features) {
  const double length_term = clamp01((static_cast<double>(features.token_count) - params.length_floor) /
                                     (params.length_saturation - params.length_floor));
  const double modifier_term = clamp01(features.modifier_diversity / params.modifier_saturation);
  return clamp01(params.length_weight * length_term + (1.0 - params.length_weight) * modifier_term);
}

double true_optimum(const SyntheticOracleParams& params, const ComplexityFeatures& features) {
  return params.omega_min + complexity_map(params, features) * (params.omega_max - params.omega_min);
}

Eigen::VectorXd true_quality(const SyntheticOracleParams& params, const ComplexityFeatures& features, double scale) {
  const double peak = true_optimum(params, features);
  const Eigen::ArrayXd d = scale - peak - params.offsets.array();
  return (params.peak_heights.array() - params.curvatures.array() * d.square()).matrix();
}

Eigen::VectorXd synthetic_generate_score(const SyntheticOracleParams& params, const MetricSchema& schema,
                                         const ComplexityFeatures& features, double scale, std::uint64_t seed) {
  params.validate(schema.size());
  Eigen::VectorXd q = true_quality(params, features, scale);
  if (params.noise_std > 0.0) {
    Rng rng(seed);
    for (Eigen::Index m = 0; m < q.size(); ++m) q[m] += params.noise_std * rng.normal();
  }
  for (std::size_t m = 0; m < schema.size(); ++m) q[static_cast<Eigen::Index>(m)] *= schema.sign(m);
  return q;
}

std::vector<PromptRecord> synthetic_prompt_pool(std::size_t count, std::uint64_t seed,
                                                const ModifierLexicon& lexicon, std::size_t first_index) {
  const auto modifiers = lexicon.words();
  if (modifiers.empty()) throw Error(ErrorCode::kInvalidArgument, "lexicon is empty");
  std::vector<PromptRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t index = first_index + i;
    Rng rng(StableHasher{}.add(seed).add(std::uint64_t{index}).digest());
    const std::size_t target_len = 2 + static_cast<std::size_t>(rng.below(29));  // 2..30 tokens
    const double modifier_rate = rng.uniform(0.0, 0.7);

    std::vector<std::string> words;
    while (words.size() < target_len) {
      if (!words.empty()) words.emplace_back(pick(kConnectors, rng));
      words.emplace_back(pick(kDeterminers, rng));
      for (int k = 0; k < 4 && rng.uniform() < modifier_rate; ++k) {
        words.push_back(modifiers[static_cast<std::size_t>(rng.below(modifiers.size()))]);
      }
      words.emplace_back(pick(kNouns, rng));
    }
    words.resize(target_len);

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    text[0] = static_cast<char>(text[0] - 'a' + 'A');
    text.push_back('.');

    char id[32];
    std::snprintf(id, sizeof(id), "p%05zu", index);
    out.push_back(PromptRecord{id, std::move(text)});
  }
  return out;
}

MetricSchema synthetic_image_schema() {
  return MetricSchema({"kid", "clip", "image_reward", "fid"},
                      {Direction::kLowerBetter, Direction::kHigherBetter, Direction::kHigherBetter,
                       Direction::kLowerBetter});
}

}  // namespace gsadvisor
