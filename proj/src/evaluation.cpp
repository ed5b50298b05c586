#include "gsadvisor/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gsadvisor/error.hpp"

namespace gsadvisor {
namespace {

void check_tables(const ScaleGrid& grid, const QualityTable& predicted, const QualityTable& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "predicted and true tables cover different prompt counts");
  }
  for (std::size_t p = 0; p < truth.size(); ++p) {
    if (predicted[p].size() != grid.size() || truth[p].size() != grid.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "every prompt needs one entry per grid scale");
    }
  }
}

std::optional<std::size_t> grid_index(const ScaleGrid& grid, double scale) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - scale) <= 1e-9) return i;
  }
  return std::nullopt;
}

// argmax_i w^T truth[i]; ties go to the smallest scale.
std::size_t oracle_index(const std::vector<QualityVector>& truth, const Eigen::VectorXd& w) {
  std::size_t best = 0;
  double best_u = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double u = w.dot(truth[i]);
    if (u > best_u) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

PolicyOutcome score_choices(std::string name, std::optional<double> fixed, const ScaleGrid& grid,
                            const std::vector<std::size_t>& choice, const QualityTable& truth,
                            const Eigen::VectorXd& w) {
  PolicyOutcome out;
  out.name = std::move(name);
  out.fixed_scale = fixed;
  const auto n = static_cast<double>(truth.size());
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const double best = w.dot(truth[p][oracle_index(truth[p], w)]);
    const double u = w.dot(truth[p][choice[p]]);
    out.chosen.push_back(grid[choice[p]]);
    out.regret.push_back(best - u);
    out.mean_utility += u / n;
    out.mean_regret += (best - u) / n;
  }
  return out;
}

std::vector<std::size_t> adaptive_choices(const ScaleGrid& grid, const QualityTable& predicted,
                                          const UtilityConfig& selection) {
  std::vector<std::size_t> out;
  out.reserve(predicted.size());
  for (const auto& row : predicted) {
    const auto result = select_from_predictions(grid, row, selection);
    out.push_back(*grid_index(grid, result.chosen_scale));
  }
  return out;
}

}  // namespace

std::vector<QualityVector> predict_grid(const PredictorModel& model, const PromptInput& input, const ScaleGrid& grid) {
  const JointRepresentation h = build_joint(input.embedding, input.complexity, grid[0], model);
  return predict_scales(model, h, grid.scales());
}

const PolicyOutcome& EvaluationSummary::policy(std::string_view name) const {
  for (const auto& p : policies) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument, "no policy named " + std::string(name));
}

EvaluationSummary evaluate_policies(const std::vector<std::string>& prompt_ids, const ScaleGrid& grid,
                                    const QualityTable& predicted, const QualityTable& truth,
                                    const UtilityConfig& selection) {
  selection.validate();
  check_tables(grid, predicted, truth);
  if (prompt_ids.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "one id per prompt required");
  if (truth.empty()) throw Error(ErrorCode::kEmptyCorpus, "no prompts to evaluate");
  const Eigen::VectorXd& w = selection.weights;
  const std::size_t n = truth.size();

  EvaluationSummary summary;
  summary.prompt_ids = prompt_ids;
  summary.grid = grid.scales();

  auto fixed = [&](std::size_t i) { return std::vector<std::size_t>(n, i); };
  if (auto i = grid_index(grid, 1.0)) summary.policies.push_back(score_choices("no_guidance", 1.0, grid, fixed(*i), truth, w));
  const auto anchor = grid_index(grid, selection.anchor);
  if (anchor) {
    summary.policies.push_back(score_choices("fixed_anchor", grid[*anchor], grid, fixed(*anchor), truth, w));
  }

  std::optional<PolicyOutcome> best_fixed;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto outcome = score_choices("best_fixed", grid[i], grid, fixed(i), truth, w);
    if (!best_fixed || outcome.mean_regret < best_fixed->mean_regret) best_fixed = std::move(outcome);
  }
  summary.policies.push_back(std::move(*best_fixed));

  const auto adaptive = adaptive_choices(grid, predicted, selection);
  summary.policies.push_back(score_choices("adaptive", std::nullopt, grid, adaptive, truth, w));

  std::vector<std::size_t> oracle;
  for (const auto& row : truth) oracle.push_back(oracle_index(row, w));
  summary.policies.push_back(score_choices("oracle", std::nullopt, grid, oracle, truth, w));

  if (anchor) {
    std::size_t wins = 0;
    std::size_t ties = 0;
    for (std::size_t p = 0; p < n; ++p) {
      const double ua = w.dot(truth[p][adaptive[p]]);
      const double uf = w.dot(truth[p][*anchor]);
      if (ua > uf) ++wins;
      else if (ua == uf) ++ties;
    }
    summary.win_rate = static_cast<double>(wins) / static_cast<double>(n);
    summary.tie_rate = static_cast<double>(ties) / static_cast<double>(n);
  }
  return summary;
}

double selection_regret(const ScaleGrid& grid, const QualityTable& predicted, const QualityTable& truth,
                        const UtilityConfig& selection, const Eigen::VectorXd& eval_weights) {
  check_tables(grid, predicted, truth);
  if (truth.empty()) throw Error(ErrorCode::kEmptyCorpus, "no prompts to evaluate");
  const auto choice = adaptive_choices(grid, predicted, selection);
  return score_choices("selection", std::nullopt, grid, choice, truth, eval_weights).mean_regret;
}

Eigen::VectorXd subset_weights(const MetricSchema& schema, const std::vector<std::string>& subset) {
  if (subset.empty()) throw Error(ErrorCode::kInvalidArgument, "metric subset is empty");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema.size()));
  for (const auto& name : subset) {
    const auto m = schema.index_of(name);
    if (m < 0) throw Error(ErrorCode::kSchemaMismatch, "metric " + name + " is not in the schema");
    w[m] = 1.0;
  }
  return w / w.sum();
}

Eigen::VectorXd per_metric_r2(const QualityTable& predicted, const QualityTable& truth) {
  if (truth.empty() || truth.front().empty()) throw Error(ErrorCode::kEmptyCorpus, "no cells to score");
  const Eigen::Index d_q = truth.front().front().size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d_q);
  double cells = 0.0;
  for (const auto& row : truth) {
    for (const auto& q : row) {
      sum += q;
      cells += 1.0;
    }
  }
  const Eigen::VectorXd mean = sum / cells;
  Eigen::VectorXd ss_res = Eigen::VectorXd::Zero(d_q);
  Eigen::VectorXd ss_tot = Eigen::VectorXd::Zero(d_q);
  for (std::size_t p = 0; p < truth.size(); ++p) {
    if (predicted.at(p).size() != truth[p].size()) throw Error(ErrorCode::kDimensionMismatch, "table shapes differ");
    for (std::size_t i = 0; i < truth[p].size(); ++i) {
      ss_res += (predicted[p][i] - truth[p][i]).cwiseAbs2();
      ss_tot += (truth[p][i] - mean).cwiseAbs2();
    }
  }
  Eigen::VectorXd r2(d_q);
  for (Eigen::Index m = 0; m < d_q; ++m) r2[m] = ss_tot[m] > 0.0 ? 1.0 - ss_res[m] / ss_tot[m] : 0.0;
  return r2;
}

std::string format_summary_table(const EvaluationSummary& summary) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %8s %14s %14s\n", "policy", "scale", "mean_utility", "mean_regret");
  out += line;
  for (const auto& p : summary.policies) {
    char scale[16] = "per-prompt";
    if (p.fixed_scale) std::snprintf(scale, sizeof(scale), "%.2f", *p.fixed_scale);
    std::snprintf(line, sizeof(line), "%-14s %8s %14.6f %14.6f\n", p.name.c_str(), scale, p.mean_utility,
                  p.mean_regret);
    out += line;
  }
  std::snprintf(line, sizeof(line), "adaptive vs fixed_anchor: win %.1f%%, tie %.1f%% over %zu prompts\n",
                100.0 * summary.win_rate, 100.0 * summary.tie_rate, summary.prompt_ids.size());
  out += line;
  if (summary.ablation) {
    std::string names;
    for (const auto& n : summary.ablation->subset) names += (names.empty() ? "" : ",") + n;
    std::snprintf(line, sizeof(line), "ablation {%s}: regret %.6f vs full %.6f\n", names.c_str(),
                  summary.ablation->subset_regret, summary.ablation->full_regret);
    out += line;
  }
  out += "(utilities are synthetic oracle values when evaluated against the synthetic curves)\n";
  return out;
}

}  // namespace gsadvisor
