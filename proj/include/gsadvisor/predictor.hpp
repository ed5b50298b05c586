#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsadvisor/embedding.hpp"
#include "gsadvisor/metric_schema.hpp"
#include "gsadvisor/text_features.hpp"

namespace gsadvisor {

// Oriented per-metric scores (higher is better for every component).
using QualityVector = Eigen::VectorXd;

inline constexpr std::size_t kParamBudget = 4'000'000;
inline constexpr std::size_t kDefaultComplexityDim = 16;
inline const std::vector<std::size_t> kDefaultHiddenSizes = {512, 256};

enum class Activation { kSilu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// phi: the complexity projection block followed by the MLP layers.
//
// Flat layout (model files, gradient checks): W_c row-major, b_c, then for
// each layer in order its weight row-major followed by its bias.
struct PredictorParameters {
  ComplexityProjection projection;
  std::vector<DenseLayer> layers;

  std::size_t count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void set_zero();
  PredictorParameters zeros_like() const;
};

// Where e(p) comes from when the model is used for selection.
struct EmbeddingSpec {
  EmbeddingSource source = EmbeddingSource::kHashed;
  std::size_t dim = kDefaultHashedEmbeddingDim;
  std::string encoder;
};

// Per-metric affine map from the last layer to quality units, q = shift + scale * y.
// Empty vectors mean the identity. train() sets it from the target mean and
// standard deviation so the network works with O(1) outputs.
struct OutputScaling {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  bool identity() const { return shift.size() == 0; }
  static OutputScaling fit(std::span<const QualityVector> targets);
};

struct PredictorModel {
  std::size_t d_e = 0;
  std::size_t d_c = 0;
  std::vector<std::size_t> layer_sizes;  // input dim, hidden sizes..., d_q
  Activation activation = Activation::kSilu;
  FeatureNormalization feature_norm = FeatureNormalization::identity();
  OutputScaling output_scaling;
  MetricSchema metric_schema;
  PredictorParameters params;

  // Text-side state that travels with the model so new prompts featurize
  // exactly as the training pool did.
  std::optional<CharNgramModel> char_lm;
  EmbeddingSpec embedding;
  std::optional<std::uint64_t> lexicon_fingerprint;

  std::size_t input_dim() const { return d_e + d_c + 1; }
  std::size_t output_dim() const { return metric_schema.size(); }
  std::size_t param_count() const { return params.count(); }
};

std::size_t count_parameters(std::size_t d_e, std::size_t d_c, std::span<const std::size_t> hidden_sizes,
                             std::size_t d_q);

// Glorot-uniform weights, zero biases. Throws BudgetExceeded above kParamBudget.
PredictorModel make_model(std::size_t d_e, std::size_t d_c, std::span<const std::size_t> hidden_sizes,
                          const MetricSchema& schema, std::uint64_t seed);

// h(p, w) = [e(p); c(p); w]. The scale is appended raw.
struct JointRepresentation {
  Eigen::VectorXd vector;
};

JointRepresentation build_joint(const SemanticEmbedding& embedding, const ComplexityFeatures& features, double scale,
                                const PredictorModel& model);

QualityVector predict(const PredictorModel& model, const JointRepresentation& h);

// Predictions for h with its scale entry replaced by each of `scales`. Shares
// the first-layer product across scales, so it is much cheaper than repeated
// predict() calls; results agree with predict() to rounding.
std::vector<QualityVector> predict_scales(const PredictorModel& model, const JointRepresentation& h,
                                          std::span<const double> scales);

// ---------------------------------------------------------------------------
// Training data

struct TrainingExample {
  std::string prompt_id;
  SemanticEmbedding embedding;
  ComplexityFeatures complexity;
  double scale = 0.0;
  QualityVector target;
};

struct PromptInput {
  std::string prompt_id;
  SemanticEmbedding embedding;
  ComplexityFeatures complexity;
};

// Examples grouped by prompt so each embedding is held once.
struct TrainingSet {
  struct Row {
    std::size_t prompt = 0;  // index into prompts
    double scale = 0.0;
    QualityVector target;
  };

  std::vector<PromptInput> prompts;
  std::vector<Row> rows;

  std::size_t size() const { return rows.size(); }
  TrainingExample example(std::size_t row) const;

  // Groups by prompt_id; the first occurrence supplies the prompt's inputs.
  static TrainingSet from_examples(std::span<const TrainingExample> examples);
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_sizes = kDefaultHiddenSizes;
  std::size_t d_c = kDefaultComplexityDim;
};

struct TrainingReport {
  double initial_loss = 0.0;        // per-component MSE before the first update
  double final_loss = 0.0;          // per-component MSE after the last update
  std::vector<double> epoch_loss;   // running per-component MSE of each epoch
  std::size_t param_count = 0;
};

struct TrainResult {
  PredictorModel model;
  TrainingReport report;
};

// Mini-batch Adam on the summed squared error. Feature normalization is fitted
// on the set's prompts. Throws SchemaMismatch, InvalidArgument, NonFiniteLoss.
TrainResult train(const TrainingSet& data, const MetricSchema& schema, const TrainConfig& config);
TrainResult train(std::span<const TrainingExample> examples, const MetricSchema& schema, const TrainConfig& config);

// Continues training an existing model in place (normalization unchanged).
TrainingReport fit(PredictorModel& model, const TrainingSet& data, const TrainConfig& config);

// Mean per-component squared error of the model over the set.
double evaluate_mse(const PredictorModel& model, const TrainingSet& data);

// ||q_hat - target||^2 for one example; accumulates d loss / d phi into grad.
double loss_and_gradient(const PredictorModel& model, const TrainingExample& example, PredictorParameters* grad);

// Batch-mean loss and gradient over the given rows, as used by one optimizer step.
double batch_loss_and_gradient(const PredictorModel& model, const TrainingSet& data, std::span<const std::size_t> rows,
                               PredictorParameters* grad);

// Max relative error between the analytic gradient and central differences over
// every parameter. Relative error uses max(|a|, |n|, kGradientCheckFloor) as
// denominator: central differences at epsilon 1e-5 carry about 1e-10 of rounding
// noise, so smaller gradients are effectively compared in absolute terms.
inline constexpr double kGradientCheckFloor = 1e-5;
double gradient_check(const PredictorModel& model, const TrainingExample& example, double epsilon = 1e-5);

inline constexpr std::string_view kModelSchema = "model.v1";

void save_model(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);

}  // namespace gsadvisor
