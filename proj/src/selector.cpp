#include "gsadvisor/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsadvisor/error.hpp"
#include "json.hpp"

namespace gsadvisor {

ScaleGrid::ScaleGrid(std::vector<double> scales) : scales_(std::move(scales)) {
  if (scales_.empty()) throw Error(ErrorCode::kInvalidArgument, "scale grid is empty");
  for (double s : scales_) {
    if (!std::isfinite(s) || !(s > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "scale grid values must be finite and > 0");
    }
  }
  std::sort(scales_.begin(), scales_.end());
  if (std::adjacent_find(scales_.begin(), scales_.end()) != scales_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "scale grid has duplicate values");
  }
}

ScaleGrid ScaleGrid::image_default() { return range(1.0, 12.0, 1.0); }

ScaleGrid ScaleGrid::audio_default() { return range(1.0, 6.0, 0.5); }

ScaleGrid ScaleGrid::range(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorCode::kInvalidArgument, "invalid scale range");
  std::vector<double> values;
  for (std::size_t i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    if (v > hi + 1e-9) break;
    values.push_back(v);
  }
  return ScaleGrid(std::move(values));
}

UtilityConfig UtilityConfig::uniform(std::size_t d_q, double alpha, double anchor) {
  if (d_q == 0) throw Error(ErrorCode::kInvalidArgument, "utility needs at least one metric");
  UtilityConfig cfg;
  cfg.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d_q), 1.0 / static_cast<double>(d_q));
  cfg.alpha = alpha;
  cfg.anchor = anchor;
  return cfg;
}

void UtilityConfig::validate() const {
  if (weights.size() == 0) throw Error(ErrorCode::kInvalidArgument, "utility weights are empty");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "utility weights must be finite and nonnegative");
  }
  if (!std::isfinite(alpha) || alpha < 0.0) throw Error(ErrorCode::kInvalidArgument, "alpha must be >= 0");
  if (!std::isfinite(anchor) || !(anchor > 0.0)) throw Error(ErrorCode::kInvalidArgument, "anchor must be > 0");
}

double utility(const QualityVector& q_hat, double scale, const UtilityConfig& config) {
  if (q_hat.size() != config.weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "quality vector has " + std::to_string(q_hat.size()) +
                                                   " metrics, weights have " + std::to_string(config.weights.size()));
  }
  const double d = scale - config.anchor;
  return config.weights.dot(q_hat) - config.alpha * d * d;
}

SelectionResult select_from_predictions(const ScaleGrid& grid, std::span<const QualityVector> predictions,
                                        const UtilityConfig& config) {
  config.validate();
  if (predictions.size() != grid.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "need one prediction per grid scale");
  }
  SelectionResult result;
  result.scales = grid.scales();
  result.predicted_quality.assign(predictions.begin(), predictions.end());
  result.utilities.reserve(grid.size());

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = utility(predictions[i], grid[i], config);
    if (!std::isfinite(u)) throw Error(ErrorCode::kInvalidArgument, "utility is not finite");
    result.utilities.push_back(u);
    if (u > best) {
      best = u;
      best_index = i;
    }
  }
  result.chosen_scale = grid[best_index];
  result.tie_broken = std::count(result.utilities.begin(), result.utilities.end(), best) > 1;
  return result;
}

SelectionResult select_scale(const PredictorModel& model, const SemanticEmbedding& embedding,
                             const ComplexityFeatures& features, const ScaleGrid& grid, const UtilityConfig& config) {
  const JointRepresentation h = build_joint(embedding, features, grid[0], model);
  return select_from_predictions(grid, predict_scales(model, h, grid.scales()), config);
}

std::string selection_report_line(const std::string& prompt_id, const SelectionResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < result.scales.size(); ++i) {
    const auto& q = result.predicted_quality[i];
    rows.push_back({{"scale", result.scales[i]},
                    {"utility", result.utilities[i]},
                    {"q_hat", std::vector<double>(q.data(), q.data() + q.size())}});
  }
  return nlohmann::json{{"id", prompt_id},
                        {"chosen_scale", result.chosen_scale},
                        {"utilities", rows},
                        {"tie_broken", result.tie_broken}}
      .dump();
}

// ---------------------------------------------------------------------------

Eigen::VectorXd cfg_combine(const NoisePrediction& noise, double scale) {
  if (noise.cond.size() != noise.uncond.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "conditional and unconditional predictions differ in size");
  }
  if (!noise.cond.allFinite() || !noise.uncond.allFinite() || !std::isfinite(scale)) {
    throw Error(ErrorCode::kInvalidArgument, "noise predictions and scale must be finite");
  }
  return (1.0 - scale) * noise.uncond + scale * noise.cond;
}

Eigen::VectorXd tilt_distribution(const Eigen::VectorXd& p_cond, const Eigen::VectorXd& p_marg, double s) {
  if (p_cond.size() != p_marg.size() || p_cond.size() == 0) {
    throw Error(ErrorCode::kSupportMismatch, "distributions must share a non-empty support");
  }
  if (!std::isfinite(s) || s < 0.0) throw Error(ErrorCode::kInvalidArgument, "tilt exponent must be >= 0");
  for (const auto* p : {&p_cond, &p_marg}) {
    if (!p->allFinite() || (p->array() < 0.0).any() || std::abs(p->sum() - 1.0) > 1e-12) {
      throw Error(ErrorCode::kInvalidArgument, "inputs must be probability vectors");
    }
  }
  for (Eigen::Index i = 0; i < p_cond.size(); ++i) {
    if (p_cond[i] > 0.0 && p_marg[i] == 0.0) {
      throw Error(ErrorCode::kDivisionByZero, "marginal is zero where the conditional has mass");
    }
  }
  if (s == 0.0) return p_cond;

  // log-space: log p + s (log p - log m), then a max-shifted softmax.
  Eigen::VectorXd log_w = Eigen::VectorXd::Constant(p_cond.size(), -std::numeric_limits<double>::infinity());
  double max_log = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p_cond.size(); ++i) {
    if (p_cond[i] > 0.0) {
      const double lp = std::log(p_cond[i]);
      log_w[i] = lp + s * (lp - std::log(p_marg[i]));
      max_log = std::max(max_log, log_w[i]);
    }
  }
  Eigen::VectorXd out(p_cond.size());
  for (Eigen::Index i = 0; i < p_cond.size(); ++i) {
    out[i] = p_cond[i] > 0.0 ? std::exp(log_w[i] - max_log) : 0.0;
  }
  return out / out.sum();
}

}  // namespace gsadvisor
