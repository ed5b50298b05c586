#include "gsadvisor/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "gsadvisor/error.hpp"
#include "gsadvisor/random.hpp"

namespace gsadvisor {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr Index kFeatureDim = static_cast<Index>(ComplexityFeatures::kDim);

template <typename Derived>
MatrixXd silu(const Eigen::MatrixBase<Derived>& z) {
  return (z.array() / (1.0 + (-z.array()).exp())).matrix();
}

// d silu / dz = s (1 + z (1 - s)), s = sigmoid(z)
template <typename Derived>
MatrixXd silu_grad(const Eigen::MatrixBase<Derived>& z) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
  return (s * (1.0 + z.array() * (1.0 - s))).matrix();
}

// Maps raw last-layer outputs (d_q x n) to quality units in place.
void apply_output_scaling(const OutputScaling& o, MatrixXd& y) {
  if (o.identity()) return;
  y = (y.array().colwise() * o.scale.array()).matrix();
  y.colwise() += o.shift;
}

struct SparseColumn {
  std::vector<Index> index;
  std::vector<double> value;
};

SparseColumn sparsify(const VectorXd& v) {
  SparseColumn out;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      out.index.push_back(i);
      out.value.push_back(v[i]);
    }
  }
  return out;
}

// Per-prompt inputs in the form the batched forward pass consumes.
struct PreparedSet {
  std::vector<SparseColumn> embeddings;
  MatrixXd z;  // kFeatureDim x prompts
};

void validate_set(const PredictorModel& model, const TrainingSet& data) {
  if (data.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  for (const auto& p : data.prompts) {
    if (static_cast<std::size_t>(p.embedding.vector.size()) != model.d_e) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding of prompt '" + p.prompt_id + "' has dimension " +
                                                     std::to_string(p.embedding.vector.size()) + ", model expects " +
                                                     std::to_string(model.d_e));
    }
  }
  for (const auto& row : data.rows) {
    if (row.prompt >= data.prompts.size()) throw Error(ErrorCode::kInvalidArgument, "row refers to unknown prompt");
    if (static_cast<std::size_t>(row.target.size()) != model.output_dim()) {
      throw Error(ErrorCode::kSchemaMismatch, "target of prompt '" + data.prompts[row.prompt].prompt_id + "' has " +
                                                  std::to_string(row.target.size()) + " metrics, schema has " +
                                                  std::to_string(model.output_dim()));
    }
    if (!row.target.allFinite() || !std::isfinite(row.scale)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite target or scale for prompt '" + data.prompts[row.prompt].prompt_id + "'");
    }
  }
}

PreparedSet prepare(const PredictorModel& model, const TrainingSet& data) {
  PreparedSet out;
  out.embeddings.reserve(data.prompts.size());
  out.z.resize(kFeatureDim, static_cast<Index>(data.prompts.size()));
  for (std::size_t i = 0; i < data.prompts.size(); ++i) {
    out.embeddings.push_back(sparsify(data.prompts[i].embedding.vector));
    out.z.col(static_cast<Index>(i)) = model.feature_norm.apply(data.prompts[i].complexity);
  }
  return out;
}

struct Workspace {
  MatrixXd zr;                       // kFeatureDim x B
  MatrixXd c;                        // d_c x B
  Eigen::RowVectorXd scales;         // 1 x B
  std::vector<MatrixXd> pre;         // per layer, out x B
  std::vector<MatrixXd> post;        // activations of hidden layers
  MatrixXd residual;                 // d_q x B, prediction - target
};

// Fills the workspace for `rows`; returns the summed squared error.
double forward(const PredictorModel& model, const PreparedSet& prep, const TrainingSet& data,
               std::span<const std::size_t> rows, Workspace& ws) {
  const auto batch = static_cast<Index>(rows.size());
  const auto d_e = static_cast<Index>(model.d_e);
  const auto d_c = static_cast<Index>(model.d_c);
  const auto& proj = model.params.projection;
  const auto& layers = model.params.layers;

  ws.zr.resize(kFeatureDim, batch);
  ws.scales.resize(batch);
  for (Index b = 0; b < batch; ++b) {
    const auto& row = data.rows[rows[static_cast<std::size_t>(b)]];
    ws.zr.col(b) = prep.z.col(static_cast<Index>(row.prompt));
    ws.scales[b] = row.scale;
  }
  ws.c.noalias() = proj.weight * ws.zr;
  ws.c.colwise() += proj.bias;

  ws.pre.resize(layers.size());
  ws.post.resize(layers.size());

  const auto& first = layers.front().weight;
  MatrixXd& z0 = ws.pre[0];
  z0.noalias() = first.middleCols(d_e, d_c) * ws.c;
  z0.noalias() += first.col(d_e + d_c) * ws.scales;
  z0.colwise() += layers.front().bias;
  for (Index b = 0; b < batch; ++b) {
    const auto& sparse = prep.embeddings[data.rows[rows[static_cast<std::size_t>(b)]].prompt];
    auto col = z0.col(b);
    for (std::size_t k = 0; k < sparse.index.size(); ++k) col.noalias() += sparse.value[k] * first.col(sparse.index[k]);
  }

  for (std::size_t l = 1; l < layers.size(); ++l) {
    ws.post[l - 1] = silu(ws.pre[l - 1]);
    ws.pre[l].noalias() = layers[l].weight * ws.post[l - 1];
    ws.pre[l].colwise() += layers[l].bias;
  }

  ws.residual = ws.pre.back();
  apply_output_scaling(model.output_scaling, ws.residual);
  for (Index b = 0; b < batch; ++b) ws.residual.col(b) -= data.rows[rows[static_cast<std::size_t>(b)]].target;
  return ws.residual.squaredNorm();
}

// grad += factor * d(SSE)/d(phi) for the rows of the preceding forward().
void backward(const PredictorModel& model, const PreparedSet& prep, const TrainingSet& data,
              std::span<const std::size_t> rows, const Workspace& ws, double factor, PredictorParameters& grad) {
  const auto batch = static_cast<Index>(rows.size());
  const auto d_e = static_cast<Index>(model.d_e);
  const auto d_c = static_cast<Index>(model.d_c);
  const auto& layers = model.params.layers;

  MatrixXd delta = (2.0 * factor) * ws.residual;
  if (!model.output_scaling.identity()) delta = (delta.array().colwise() * model.output_scaling.scale.array()).matrix();
  for (std::size_t l = layers.size() - 1; l >= 1; --l) {
    grad.layers[l].weight.noalias() += delta * ws.post[l - 1].transpose();
    grad.layers[l].bias += delta.rowwise().sum();
    MatrixXd upstream = layers[l].weight.transpose() * delta;
    delta = (upstream.array() * silu_grad(ws.pre[l - 1]).array()).matrix();
  }

  auto& g0 = grad.layers.front();
  g0.weight.middleCols(d_e, d_c).noalias() += delta * ws.c.transpose();
  g0.weight.col(d_e + d_c).noalias() += delta * ws.scales.transpose();
  g0.bias += delta.rowwise().sum();
  for (Index b = 0; b < batch; ++b) {
    const auto& sparse = prep.embeddings[data.rows[rows[static_cast<std::size_t>(b)]].prompt];
    const auto dcol = delta.col(b);
    for (std::size_t k = 0; k < sparse.index.size(); ++k) {
      g0.weight.col(sparse.index[k]).noalias() += sparse.value[k] * dcol;
    }
  }

  const MatrixXd dc = layers.front().weight.middleCols(d_e, d_c).transpose() * delta;
  grad.projection.weight.noalias() += dc * ws.zr.transpose();
  grad.projection.bias += dc.rowwise().sum();
}

template <typename Fn>
void for_each_block(PredictorParameters& p, Fn&& fn) {
  fn(p.projection.weight.data(), static_cast<std::size_t>(p.projection.weight.size()));
  fn(p.projection.bias.data(), static_cast<std::size_t>(p.projection.bias.size()));
  for (auto& layer : p.layers) {
    fn(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    fn(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

std::vector<std::span<double>> blocks(PredictorParameters& p) {
  std::vector<std::span<double>> out;
  for_each_block(p, [&](double* data, std::size_t n) { out.emplace_back(data, n); });
  return out;
}

class Adam {
 public:
  Adam(PredictorParameters& shape, const TrainConfig& config) : config_(config) {
    for (auto block : blocks(shape)) {
      m_.emplace_back(block.size(), 0.0);
      v_.emplace_back(block.size(), 0.0);
    }
  }

  // Applies one step and clears the gradient.
  void step(PredictorParameters& params, PredictorParameters& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double lr = config_.learning_rate;
    const double eps = config_.adam_epsilon;
    auto p_blocks = blocks(params);
    auto g_blocks = blocks(grad);
    for (std::size_t k = 0; k < p_blocks.size(); ++k) {
      double* __restrict p = p_blocks[k].data();
      double* __restrict g = g_blocks[k].data();
      double* __restrict m = m_[k].data();
      double* __restrict v = v_[k].data();
      const std::size_t n = p_blocks[k].size();
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        g[i] = 0.0;
      }
    }
  }

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

double full_pass_sse(const PredictorModel& model, const PreparedSet& prep, const TrainingSet& data,
                     std::size_t chunk) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Workspace ws;
  double sse = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const auto n = std::min(chunk, rows.size() - start);
    sse += forward(model, prep, data, std::span(rows).subspan(start, n), ws);
  }
  return sse;
}

void glorot_fill(MatrixXd& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  // Row-major fill order keeps initialization tied to the documented flat layout.
  for (Index r = 0; r < w.rows(); ++r) {
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kSilu: return "silu";
  }
  return "silu";
}

Activation parse_activation(std::string_view s) {
  if (s == "silu") return Activation::kSilu;
  throw Error(ErrorCode::kFormatError, "unknown activation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t PredictorParameters::count() const {
  std::size_t n = static_cast<std::size_t>(projection.weight.size() + projection.bias.size());
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

std::vector<double> PredictorParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  auto push_matrix = [&](const MatrixXd& w) {
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
  };
  push_matrix(projection.weight);
  flat.insert(flat.end(), projection.bias.data(), projection.bias.data() + projection.bias.size());
  for (const auto& layer : layers) {
    push_matrix(layer.weight);
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

void PredictorParameters::assign(std::span<const double> flat) {
  if (flat.size() != count()) {
    throw Error(ErrorCode::kDimensionMismatch, "flat parameter vector has " + std::to_string(flat.size()) +
                                                   " entries, layout needs " + std::to_string(count()));
  }
  std::size_t pos = 0;
  auto take_matrix = [&](MatrixXd& w) {
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = flat[pos++];
    }
  };
  auto take_vector = [&](VectorXd& v) {
    for (Index i = 0; i < v.size(); ++i) v[i] = flat[pos++];
  };
  take_matrix(projection.weight);
  take_vector(projection.bias);
  for (auto& layer : layers) {
    take_matrix(layer.weight);
    take_vector(layer.bias);
  }
}

void PredictorParameters::set_zero() {
  for_each_block(*this, [](double* data, std::size_t n) { std::fill(data, data + n, 0.0); });
}

PredictorParameters PredictorParameters::zeros_like() const {
  PredictorParameters out = *this;
  out.set_zero();
  return out;
}

std::size_t count_parameters(std::size_t d_e, std::size_t d_c, std::span<const std::size_t> hidden_sizes,
                             std::size_t d_q) {
  std::size_t n = d_c * ComplexityFeatures::kDim + d_c;
  std::size_t fan_in = d_e + d_c + 1;
  for (auto h : hidden_sizes) {
    n += fan_in * h + h;
    fan_in = h;
  }
  return n + fan_in * d_q + d_q;
}

PredictorModel make_model(std::size_t d_e, std::size_t d_c, std::span<const std::size_t> hidden_sizes,
                          const MetricSchema& schema, std::uint64_t seed) {
  if (d_e == 0 || d_c == 0) throw Error(ErrorCode::kInvalidArgument, "d_e and d_c must be positive");
  if (schema.size() == 0) throw Error(ErrorCode::kSchemaMismatch, "metric schema is empty");
  for (auto h : hidden_sizes) {
    if (h == 0) throw Error(ErrorCode::kInvalidArgument, "hidden layer sizes must be positive");
  }
  const std::size_t n_params = count_parameters(d_e, d_c, hidden_sizes, schema.size());
  if (n_params > kParamBudget) {
    throw Error(ErrorCode::kBudgetExceeded, "model has " + std::to_string(n_params) +
                                                " parameters, budget is " + std::to_string(kParamBudget));
  }

  PredictorModel model;
  model.d_e = d_e;
  model.d_c = d_c;
  model.metric_schema = schema;
  model.embedding.dim = d_e;
  model.layer_sizes.push_back(model.input_dim());
  model.layer_sizes.insert(model.layer_sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  model.layer_sizes.push_back(schema.size());

  Rng rng(seed);
  auto& proj = model.params.projection;
  proj.weight.resize(static_cast<Index>(d_c), kFeatureDim);
  glorot_fill(proj.weight, rng);
  proj.bias = VectorXd::Zero(static_cast<Index>(d_c));
  for (std::size_t l = 1; l < model.layer_sizes.size(); ++l) {
    DenseLayer layer;
    layer.weight.resize(static_cast<Index>(model.layer_sizes[l]), static_cast<Index>(model.layer_sizes[l - 1]));
    glorot_fill(layer.weight, rng);
    layer.bias = VectorXd::Zero(static_cast<Index>(model.layer_sizes[l]));
    model.params.layers.push_back(std::move(layer));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Inference

JointRepresentation build_joint(const SemanticEmbedding& embedding, const ComplexityFeatures& features, double scale,
                                const PredictorModel& model) {
  if (static_cast<std::size_t>(embedding.vector.size()) != model.d_e) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding dimension " + std::to_string(embedding.vector.size()) +
                                                   " does not match model d_e " + std::to_string(model.d_e));
  }
  const VectorXd c = project_complexity(features, model.params.projection, model.feature_norm);
  if (static_cast<std::size_t>(c.size()) != model.d_c) {
    throw Error(ErrorCode::kDimensionMismatch, "complexity projection output does not match model d_c");
  }
  JointRepresentation h;
  h.vector.resize(static_cast<Index>(model.input_dim()));
  h.vector << embedding.vector, c, scale;
  return h;
}

QualityVector predict(const PredictorModel& model, const JointRepresentation& h) {
  if (static_cast<std::size_t>(h.vector.size()) != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "joint representation has dimension " +
                                                   std::to_string(h.vector.size()) + ", model expects " +
                                                   std::to_string(model.input_dim()));
  }
  const auto& layers = model.params.layers;
  MatrixXd x = layers.front().weight * h.vector + layers.front().bias;
  for (std::size_t l = 1; l < layers.size(); ++l) {
    x = layers[l].weight * silu(x) + layers[l].bias;
  }
  apply_output_scaling(model.output_scaling, x);
  return x.col(0);
}

std::vector<QualityVector> predict_scales(const PredictorModel& model, const JointRepresentation& h,
                                          std::span<const double> scales) {
  if (static_cast<std::size_t>(h.vector.size()) != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "joint representation has dimension " +
                                                   std::to_string(h.vector.size()) + ", model expects " +
                                                   std::to_string(model.input_dim()));
  }
  const auto& layers = model.params.layers;
  const auto last = h.vector.size() - 1;
  // The scale only enters the first layer through its last column.
  VectorXd base_input = h.vector;
  base_input[last] = 0.0;
  const VectorXd base = layers.front().weight * base_input + layers.front().bias;
  MatrixXd x(base.size(), static_cast<Eigen::Index>(scales.size()));
  for (std::size_t i = 0; i < scales.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = base + layers.front().weight.col(last) * scales[i];
  }
  for (std::size_t l = 1; l < layers.size(); ++l) {
    x = (layers[l].weight * silu(x)).colwise() + layers[l].bias;
  }
  apply_output_scaling(model.output_scaling, x);
  std::vector<QualityVector> out;
  out.reserve(scales.size());
  for (Eigen::Index i = 0; i < x.cols(); ++i) out.emplace_back(x.col(i));
  return out;
}

// ---------------------------------------------------------------------------
// Training

OutputScaling OutputScaling::fit(std::span<const QualityVector> targets) {
  OutputScaling o;
  if (targets.empty()) return o;
  const Index d_q = targets.front().size();
  o.shift = VectorXd::Zero(d_q);
  for (const auto& t : targets) o.shift += t;
  o.shift /= static_cast<double>(targets.size());
  VectorXd var = VectorXd::Zero(d_q);
  for (const auto& t : targets) var += (t - o.shift).cwiseAbs2();
  var /= static_cast<double>(targets.size());
  o.scale = var.cwiseSqrt();
  for (auto& s : o.scale) {
    if (!(s > 1e-12)) s = 1.0;  // constant metric: keep unit scale
  }
  return o;
}

TrainingExample TrainingSet::example(std::size_t row) const {
  const auto& r = rows.at(row);
  const auto& p = prompts.at(r.prompt);
  return TrainingExample{p.prompt_id, p.embedding, p.complexity, r.scale, r.target};
}

TrainingSet TrainingSet::from_examples(std::span<const TrainingExample> examples) {
  TrainingSet set;
  std::map<std::string, std::size_t> index;
  for (const auto& ex : examples) {
    auto [it, inserted] = index.emplace(ex.prompt_id, set.prompts.size());
    if (inserted) set.prompts.push_back(PromptInput{ex.prompt_id, ex.embedding, ex.complexity});
    set.rows.push_back(Row{it->second, ex.scale, ex.target});
  }
  return set;
}

TrainingReport fit(PredictorModel& model, const TrainingSet& data, const TrainConfig& config) {
  if (config.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  if (!(config.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be positive");
  validate_set(model, data);
  const PreparedSet prep = prepare(model, data);
  const double denom = static_cast<double>(data.size() * model.output_dim());

  TrainingReport report;
  report.param_count = model.param_count();
  report.initial_loss = full_pass_sse(model, prep, data, 256) / denom;

  PredictorParameters grad = model.params.zeros_like();
  Adam optimizer(model.params, config);
  Workspace ws;
  Rng rng(mix64(config.seed ^ 0x747261696e5f7264ULL));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_sse = 0.0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const auto n = std::min(config.batch_size, order.size() - start);
      const auto rows = std::span<const std::size_t>(order).subspan(start, n);
      const double sse = forward(model, prep, data, rows, ws);
      if (!std::isfinite(sse)) {
        std::ostringstream msg;
        msg << "loss became " << sse << " at epoch " << epoch << ", batch " << batch_no
            << "; lower the learning rate or check target scales";
        throw Error(ErrorCode::kNonFiniteLoss, msg.str());
      }
      epoch_sse += sse;
      backward(model, prep, data, rows, ws, 1.0 / static_cast<double>(n), grad);
      optimizer.step(model.params, grad);
    }
    report.epoch_loss.push_back(epoch_sse / denom);
  }
  report.final_loss = full_pass_sse(model, prep, data, 256) / denom;
  return report;
}

TrainResult train(const TrainingSet& data, const MetricSchema& schema, const TrainConfig& config) {
  if (data.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  const std::size_t d_e = static_cast<std::size_t>(data.prompts.at(data.rows.front().prompt).embedding.vector.size());
  TrainResult result{make_model(d_e, config.d_c, config.hidden_sizes, schema, config.seed), {}};

  std::vector<ComplexityFeatures> pool;
  pool.reserve(data.prompts.size());
  for (const auto& p : data.prompts) pool.push_back(p.complexity);
  result.model.feature_norm = FeatureNormalization::fit(pool);
  validate_set(result.model, data);
  std::vector<QualityVector> targets;
  targets.reserve(data.rows.size());
  for (const auto& row : data.rows) targets.push_back(row.target);
  result.model.output_scaling = OutputScaling::fit(targets);
  if (!data.prompts.empty()) result.model.embedding.source = data.prompts.front().embedding.source;

  result.report = fit(result.model, data, config);
  return result;
}

TrainResult train(std::span<const TrainingExample> examples, const MetricSchema& schema, const TrainConfig& config) {
  return train(TrainingSet::from_examples(examples), schema, config);
}

double evaluate_mse(const PredictorModel& model, const TrainingSet& data) {
  validate_set(model, data);
  const PreparedSet prep = prepare(model, data);
  return full_pass_sse(model, prep, data, 256) / static_cast<double>(data.size() * model.output_dim());
}

double batch_loss_and_gradient(const PredictorModel& model, const TrainingSet& data, std::span<const std::size_t> rows,
                               PredictorParameters* grad) {
  validate_set(model, data);
  const PreparedSet prep = prepare(model, data);
  Workspace ws;
  const double n = static_cast<double>(rows.size());
  const double sse = forward(model, prep, data, rows, ws);
  if (grad != nullptr) backward(model, prep, data, rows, ws, 1.0 / n, *grad);
  return sse / n;
}

double loss_and_gradient(const PredictorModel& model, const TrainingExample& example, PredictorParameters* grad) {
  const TrainingExample one[] = {example};
  const TrainingSet set = TrainingSet::from_examples(one);
  const std::size_t row = 0;
  return batch_loss_and_gradient(model, set, std::span(&row, 1), grad);
}

double gradient_check(const PredictorModel& model, const TrainingExample& example, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument, "gradient check epsilon must lie in [1e-7, 1e-3]");
  }
  PredictorParameters grad = model.params.zeros_like();
  loss_and_gradient(model, example, &grad);
  const std::vector<double> analytic = grad.flatten();

  // Numeric side goes through the dense inference path (build_joint + predict).
  PredictorModel probe = model;
  std::vector<double> flat = model.params.flatten();
  auto loss_at = [&](std::size_t i, double value) {
    const double saved = flat[i];
    flat[i] = value;
    probe.params.assign(flat);
    flat[i] = saved;
    const VectorXd diff =
        predict(probe, build_joint(example.embedding, example.complexity, example.scale, probe)) - example.target;
    return diff.squaredNorm();
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double numeric = (loss_at(i, flat[i] + epsilon) - loss_at(i, flat[i] - epsilon)) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradientCheckFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace gsadvisor
