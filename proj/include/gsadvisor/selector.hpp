#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsadvisor/predictor.hpp"

namespace gsadvisor {

// Candidate scale set S. Construction sorts the input; duplicates,
// non-finite, or non-positive values are rejected.
class ScaleGrid {
 public:
  explicit ScaleGrid(std::vector<double> scales);

  // {1, 2, ..., 12}
  static ScaleGrid image_default();
  // {1.0, 1.5, ..., 6.0}
  static ScaleGrid audio_default();
  // lo, lo + step, ... up to hi (inclusive within 1e-9).
  static ScaleGrid range(double lo, double hi, double step);

  const std::vector<double>& scales() const { return scales_; }
  std::size_t size() const { return scales_.size(); }
  double operator[](std::size_t i) const { return scales_[i]; }

 private:
  std::vector<double> scales_;
};

inline constexpr double kImageDefaultAnchor = 5.0;
inline constexpr double kDefaultAlpha = 0.05;

struct UtilityConfig {
  Eigen::VectorXd weights;  // w >= 0, one per metric
  double alpha = kDefaultAlpha;
  double anchor = kImageDefaultAnchor;

  // w = 1/d_q on every metric.
  static UtilityConfig uniform(std::size_t d_q, double alpha = kDefaultAlpha, double anchor = kImageDefaultAnchor);

  void validate() const;
};

struct SelectionResult {
  double chosen_scale = 0.0;
  std::vector<double> scales;
  std::vector<double> utilities;
  std::vector<QualityVector> predicted_quality;
  bool tie_broken = false;  // another scale reached the same maximal utility
};

// w^T q_hat - alpha (scale - anchor)^2
double utility(const QualityVector& q_hat, double scale, const UtilityConfig& config);

// Argmax of utility over the grid for precomputed predictions (one per grid
// point); ties go to the smallest scale.
SelectionResult select_from_predictions(const ScaleGrid& grid, std::span<const QualityVector> predictions,
                                        const UtilityConfig& config);

SelectionResult select_scale(const PredictorModel& model, const SemanticEmbedding& embedding,
                             const ComplexityFeatures& features, const ScaleGrid& grid, const UtilityConfig& config);

// Selection report row: {"id","chosen_scale","utilities":[{"scale","utility","q_hat"}],"tie_broken"}.
std::string selection_report_line(const std::string& prompt_id, const SelectionResult& result);

// ---------------------------------------------------------------------------
// Guidance identities

struct NoisePrediction {
  Eigen::VectorXd cond;
  Eigen::VectorXd uncond;
};

// (1 - scale) * uncond + scale * cond
Eigen::VectorXd cfg_combine(const NoisePrediction& noise, double scale);

// Normalized p_cond * (p_cond / p_marg)^s over a finite support.
Eigen::VectorXd tilt_distribution(const Eigen::VectorXd& p_cond, const Eigen::VectorXd& p_marg, double s);

}  // namespace gsadvisor
