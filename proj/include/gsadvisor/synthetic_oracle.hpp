#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "gsadvisor/metric_schema.hpp"
#include "gsadvisor/prompts.hpp"
#include "gsadvisor/text_features.hpp"

namespace gsadvisor {

// Parametric stand-in for a generator plus scorers. For metric m the oriented
// quality of prompt p at scale w is
//
//   q_m(p, w) = A_m - B_m (w - w*(p) - offset_m)^2 + noise,
//   w*(p)     = omega_min + kappa(p) (omega_max - omega_min),
//
// where kappa is complexity_map() below. With zero offsets every metric peaks
// at w*(p); with offsets whose B-weighted sum is zero the uniform-weight
// utility still peaks at w*(p) while individual metrics disagree.
struct SyntheticOracleParams {
  double omega_min = 2.0;
  double omega_max = 10.0;
  Eigen::VectorXd peak_heights;  // A_m
  Eigen::VectorXd curvatures;    // B_m > 0
  Eigen::VectorXd offsets;       // per-metric peak shift, zero by default
  double noise_std = 0.1;

  // kappa = length_weight * clamp((tokens - length_floor) / (length_saturation - length_floor))
  //       + (1 - length_weight) * clamp(modifier_diversity / modifier_saturation)
  double length_floor = 2.0;
  double length_saturation = 24.0;
  double modifier_saturation = 0.5;
  double length_weight = 0.75;

  // Four metrics with distinct heights and curvatures, zero offsets.
  static SyntheticOracleParams defaults(std::size_t d_q = 4);

  void validate(std::size_t d_q) const;
};

// kappa(p) in [0, 1]; nondecreasing in token_count and modifier_diversity.
double complexity_map(const SyntheticOracleParams& params, const ComplexityFeatures& features);

double true_optimum(const SyntheticOracleParams& params, const ComplexityFeatures& features);

// Noise-free oriented quality curve at one scale.
Eigen::VectorXd true_quality(const SyntheticOracleParams& params, const ComplexityFeatures& features, double scale);

// One sample's scores in raw metric orientation (lower-better metrics are
// reported negated). Deterministic in the seed.
Eigen::VectorXd synthetic_generate_score(const SyntheticOracleParams& params, const MetricSchema& schema,
                                         const ComplexityFeatures& features, double scale, std::uint64_t seed);

// Prompts of widely varying length and modifier density, built from the
// lexicon's words and a fixed noun/connector vocabulary. Ids are "p00000"...
std::vector<PromptRecord> synthetic_prompt_pool(std::size_t count, std::uint64_t seed,
                                                const ModifierLexicon& lexicon, std::size_t first_index = 0);

// Image-style metric set used by synthetic configs.
MetricSchema synthetic_image_schema();

}  // namespace gsadvisor
