#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsadvisor/predictor.hpp"
#include "gsadvisor/selector.hpp"

namespace gsadvisor {

// Per-prompt tables indexed [prompt][grid point]. Quality vectors are oriented.
using QualityTable = std::vector<std::vector<QualityVector>>;

// Model predictions for every grid point of one prompt.
std::vector<QualityVector> predict_grid(const PredictorModel& model, const PromptInput& input, const ScaleGrid& grid);

struct PolicyOutcome {
  std::string name;
  std::optional<double> fixed_scale;  // unset for per-prompt policies
  double mean_utility = 0.0;
  double mean_regret = 0.0;
  std::vector<double> chosen;  // per prompt
  std::vector<double> regret;  // per prompt
};

struct AblationOutcome {
  std::vector<std::string> subset;
  double subset_regret = 0.0;  // selection with weights on the subset only
  double full_regret = 0.0;    // selection with the full weights
};

struct EvaluationSummary {
  std::vector<std::string> prompt_ids;
  std::vector<double> grid;
  std::vector<PolicyOutcome> policies;  // no_guidance, fixed_anchor, best_fixed, adaptive, oracle
  double win_rate = 0.0;   // adaptive strictly better than fixed_anchor
  double tie_rate = 0.0;
  std::optional<AblationOutcome> ablation;

  const PolicyOutcome& policy(std::string_view name) const;
};

// True utility is w^T q with alpha = 0; regret is measured against the best
// grid point under `truth`. Adaptive picks use `selection` (alpha and anchor
// included) on `predicted`. Fixed policies whose scale is off the grid are
// omitted.
EvaluationSummary evaluate_policies(const std::vector<std::string>& prompt_ids, const ScaleGrid& grid,
                                    const QualityTable& predicted, const QualityTable& truth,
                                    const UtilityConfig& selection);

// Mean regret under `eval_weights` of the scales picked with `selection`.
double selection_regret(const ScaleGrid& grid, const QualityTable& predicted, const QualityTable& truth,
                        const UtilityConfig& selection, const Eigen::VectorXd& eval_weights);

// Uniform weights over the named metrics, zero elsewhere.
Eigen::VectorXd subset_weights(const MetricSchema& schema, const std::vector<std::string>& subset);

// Coefficient of determination per metric over all (prompt, grid point) cells.
Eigen::VectorXd per_metric_r2(const QualityTable& predicted, const QualityTable& truth);

// Human-readable policy table.
std::string format_summary_table(const EvaluationSummary& summary);

}  // namespace gsadvisor
