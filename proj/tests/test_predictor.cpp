#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "gsadvisor/predictor.hpp"
#include "gsadvisor/random.hpp"
#include "test_support.hpp"

using namespace gsadvisor;
using testing::error_code;

namespace {

MetricSchema two_metrics() { return MetricSchema({"clip", "fid"}, {Direction::kHigherBetter, Direction::kLowerBetter}); }

const CharNgramModel& lm() {
  static const std::vector<std::string> corpus = {"a white car", "two red buses near a bridge", "a green kite"};
  static const CharNgramModel model = train_char_lm(corpus);
  return model;
}

SemanticEmbedding random_embedding(std::size_t d, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = rng.normal();
  return SemanticEmbedding{v.normalized(), EmbeddingSource::kHashed, ""};
}

ComplexityFeatures random_features(Rng& rng) {
  static const std::vector<std::string> words = {"a", "white", "car", "red", "bus", "near", "the", "bright", "kite"};
  std::string text;
  const auto n = 1 + rng.below(8);
  for (std::uint64_t i = 0; i < n; ++i) text += words[rng.below(words.size())] + " ";
  return complexity_features(tokenize(text), lm(), testing::lexicon());
}

// Mean/std of raw features so z-scores stay O(1) in gradient checks.
FeatureNormalization rough_norm() {
  FeatureNormalization n = FeatureNormalization::identity();
  n.means = {5, 25, 2, 8, 0.2, 0.8, 4};
  n.stds = {3, 15, 1, 4, 0.2, 0.2, 2};
  return n;
}

TrainingExample random_example(const PredictorModel& model, Rng& rng, const std::string& id) {
  TrainingExample ex;
  ex.prompt_id = id;
  ex.embedding = random_embedding(model.d_e, rng);
  ex.complexity = random_features(rng);
  ex.scale = rng.uniform(1.0, 12.0);
  ex.target = Eigen::VectorXd(static_cast<Eigen::Index>(model.output_dim()));
  for (auto& t : ex.target) t = rng.normal();
  return ex;
}

}  // namespace

TEST_SUITE("predictor") {
  TEST_CASE("joint representation layout") {
    PredictorModel model = make_model(2, 1, {}, two_metrics(), 1);
    model.params.projection.weight.setZero();
    model.params.projection.bias << 0.5;
    SemanticEmbedding e{Eigen::Vector2d(1, 0), EmbeddingSource::kFile, "p"};
    const ComplexityFeatures f;
    const auto h5 = build_joint(e, f, 5.0, model);
    CHECK(h5.vector == Eigen::Vector4d(1, 0, 0.5, 5.0));
    const auto h3 = build_joint(e, f, 3.0, model);
    CHECK(h3.vector.head(3) == h5.vector.head(3));
    CHECK(h3.vector[3] == 3.0);

    SemanticEmbedding wrong{Eigen::Vector3d(1, 0, 0), EmbeddingSource::kFile, "p"};
    CHECK(error_code([&] { build_joint(wrong, f, 5.0, model); }) == ErrorCode::kDimensionMismatch);
    CHECK(error_code([&] { predict(model, {Eigen::VectorXd::Zero(5)}); }) == ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("zero parameters predict zero") {
    PredictorModel model = make_model(8, 4, std::vector<std::size_t>{16, 8}, two_metrics(), 2);
    model.params.set_zero();
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd h(model.input_dim());
      for (auto& x : h) x = rng.normal();
      CHECK(predict(model, {h}) == Eigen::VectorXd::Zero(2));
    }
  }

  TEST_CASE("single linear layer computes W h + b") {
    PredictorModel model = make_model(3, 2, {}, two_metrics(), 3);
    Rng rng(6);
    for (auto& x : model.params.layers[0].bias) x = rng.normal();
    Eigen::VectorXd h(6);
    for (auto& x : h) x = rng.normal();
    const auto& W = model.params.layers[0].weight;
    const auto& b = model.params.layers[0].bias;
    const auto q = predict(model, {h});
    for (Eigen::Index r = 0; r < 2; ++r) {
      double acc = b[r];
      for (Eigen::Index c = 0; c < 6; ++c) acc += W(r, c) * h[c];
      CHECK(q[r] == doctest::Approx(acc).epsilon(1e-14));
    }
    CHECK(predict(model, {h}) == q);
  }

  TEST_CASE("predict_scales agrees with predict") {
    PredictorModel model = make_model(16, 4, std::vector<std::size_t>{32, 8}, two_metrics(), 4);
    Rng rng(7);
    const auto e = random_embedding(16, rng);
    const auto f = random_features(rng);
    const std::vector<double> scales = {1, 2.5, 7, 12};
    const auto batch = predict_scales(model, build_joint(e, f, 1.0, model), scales);
    for (std::size_t i = 0; i < scales.size(); ++i) {
      const auto single = predict(model, build_joint(e, f, scales[i], model));
      CHECK((batch[i] - single).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("parameter count and budget") {
    const auto schema = MetricSchema::parse("kid:lower,clip:higher,image_reward:higher,fid:lower");
    const std::size_t d_in = 4096 + 16 + 1;
    const std::size_t expected = 16 * 7 + 16 + d_in * 512 + 512 + 512 * 256 + 256 + 256 * 4 + 4;
    CHECK(count_parameters(4096, 16, kDefaultHiddenSizes, 4) == expected);
    const auto model = make_model(4096, 16, kDefaultHiddenSizes, schema, 0);
    CHECK(model.param_count() == expected);
    CHECK(model.param_count() <= kParamBudget);
    CHECK(make_model(512, 16, kDefaultHiddenSizes, schema, 0).param_count() < 500'000);
    const std::vector<std::size_t> wide = {1024, 1024};
    CHECK(error_code([&] { make_model(4096, 16, wide, schema, 0); }) == ErrorCode::kBudgetExceeded);
  }

  TEST_CASE("flat layout round-trips") {
    PredictorModel model = make_model(5, 3, std::vector<std::size_t>{4}, two_metrics(), 8);
    const auto flat = model.params.flatten();
    CHECK(flat.size() == model.param_count());
    CHECK(flat[0] == model.params.projection.weight(0, 0));
    CHECK(flat[1] == model.params.projection.weight(0, 1));
    CHECK(flat[3 * 7] == model.params.projection.bias[0]);
    CHECK(flat[3 * 7 + 3 + 1] == model.params.layers[0].weight(0, 1));
    auto copy = model.params.zeros_like();
    copy.assign(flat);
    CHECK(copy.flatten() == flat);
  }

  TEST_CASE("gradient check on random small models") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t d_e = 2 + rng.below(8);
      const std::size_t d_c = 1 + rng.below(4);
      std::vector<std::size_t> hidden;
      for (std::uint64_t l = 0, n = rng.below(3); l < n; ++l) hidden.push_back(2 + rng.below(12));
      PredictorModel model = make_model(d_e, d_c, hidden, two_metrics(), rng.next());
      model.feature_norm = rough_norm();
      for (auto& layer : model.params.layers) {
        for (auto& b : layer.bias) b = 0.1 * rng.normal();
      }
      if (trial % 2 == 1) {
        model.output_scaling.shift = Eigen::Vector2d(rng.normal(), rng.normal());
        model.output_scaling.scale = Eigen::Vector2d(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0));
      }
      REQUIRE(model.param_count() <= 1000);
      const auto ex = random_example(model, rng, "g");
      worst = std::max(worst, gradient_check(model, ex, 1e-5));
    }
    CHECK(worst < 1e-4);
    CHECK(error_code([] {
            const auto m = make_model(2, 1, {}, MetricSchema({"a"}, {Direction::kHigherBetter}), 0);
            TrainingExample ex{"x", {Eigen::Vector2d(1, 0), EmbeddingSource::kHashed, "x"}, {}, 1.0,
                               Eigen::VectorXd::Zero(1)};
            gradient_check(m, ex, 1e-2);
          }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("gradient vanishes at an exact fit") {
    Rng rng(9);
    PredictorModel model = make_model(6, 3, std::vector<std::size_t>{10}, two_metrics(), 10);
    model.feature_norm = rough_norm();
    auto ex = random_example(model, rng, "z");
    ex.target = predict(model, build_joint(ex.embedding, ex.complexity, ex.scale, model));
    auto grad = model.params.zeros_like();
    CHECK(loss_and_gradient(model, ex, &grad) == 0.0);
    for (double g : grad.flatten()) CHECK(std::abs(g) < 1e-8);
  }

  TEST_CASE("linear model gradient matches the closed form") {
    Rng rng(12);
    PredictorModel model = make_model(4, 2, {}, two_metrics(), 13);
    model.feature_norm = rough_norm();
    for (auto& b : model.params.layers[0].bias) b = rng.normal();
    for (auto& b : model.params.projection.bias) b = rng.normal();
    const auto ex = random_example(model, rng, "lin");

    const Eigen::VectorXd z = model.feature_norm.apply(ex.complexity);
    const Eigen::VectorXd h = build_joint(ex.embedding, ex.complexity, ex.scale, model).vector;
    const auto& W = model.params.layers[0].weight;
    const Eigen::VectorXd r = W * h + model.params.layers[0].bias - ex.target;
    // L = ||r||^2: dW = 2 r h^T, db = 2 r; c = W_c z + b_c feeds columns d_e..d_e+d_c of W.
    const Eigen::MatrixXd gW = 2.0 * r * h.transpose();
    const Eigen::VectorXd gb = 2.0 * r;
    const Eigen::VectorXd gc = W.middleCols(4, 2).transpose() * (2.0 * r);
    const Eigen::MatrixXd gWc = gc * z.transpose();

    std::vector<double> expected;
    for (Eigen::Index i = 0; i < gWc.rows(); ++i)
      for (Eigen::Index j = 0; j < gWc.cols(); ++j) expected.push_back(gWc(i, j));
    for (Eigen::Index i = 0; i < gc.size(); ++i) expected.push_back(gc[i]);
    for (Eigen::Index i = 0; i < gW.rows(); ++i)
      for (Eigen::Index j = 0; j < gW.cols(); ++j) expected.push_back(gW(i, j));
    for (Eigen::Index i = 0; i < gb.size(); ++i) expected.push_back(gb[i]);

    auto grad = model.params.zeros_like();
    loss_and_gradient(model, ex, &grad);
    const auto got = grad.flatten();
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-10).scale(1.0));
    }
  }

  TEST_CASE("training fits a constant target") {
    Rng rng(14);
    std::vector<TrainingExample> examples;
    Eigen::Vector2d v(0.7, -1.3);
    for (int p = 0; p < 20; ++p) {
      const auto e = random_embedding(8, rng);
      const auto f = random_features(rng);
      for (double s : {1.0, 4.0, 8.0}) examples.push_back({"p" + std::to_string(p), e, f, s, v});
    }
    TrainConfig cfg;
    cfg.epochs = 10000;
    cfg.batch_size = examples.size();
    cfg.learning_rate = 1e-2;
    cfg.hidden_sizes = {16};
    cfg.d_c = 4;
    cfg.seed = 1;
    auto result = train(examples, two_metrics(), cfg);
    CHECK(result.report.final_loss < result.report.initial_loss);
    // Later passes at smaller steps remove the Adam jitter left by the first.
    for (double lr : {1e-3, 1e-4}) {
      cfg.learning_rate = lr;
      fit(result.model, TrainingSet::from_examples(examples), cfg);
    }
    double worst = 0.0;
    for (const auto& ex : examples) {
      const auto q = predict(result.model, build_joint(ex.embedding, ex.complexity, ex.scale, result.model));
      worst = std::max(worst, (q - v).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-3);
  }

  TEST_CASE("training recovers a linear map without hidden layers") {
    Rng rng(15);
    const std::size_t d_e = 6;
    Eigen::MatrixXd M(2, d_e);
    for (auto& x : M.reshaped()) x = rng.normal();
    const Eigen::Vector2d m_scale(0.3, -0.2);
    const Eigen::Vector2d bias(0.5, 1.0);
    std::vector<TrainingExample> examples;
    for (int p = 0; p < 40; ++p) {
      const auto e = random_embedding(d_e, rng);
      const auto f = random_features(rng);
      for (double s : {1.0, 3.0, 5.0, 7.0}) {
        examples.push_back({"p" + std::to_string(p), e, f, s, M * e.vector + m_scale * s + bias});
      }
    }
    TrainConfig cfg;
    cfg.epochs = 600;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    cfg.hidden_sizes = {};
    cfg.d_c = 2;
    const auto result = train(examples, two_metrics(), cfg);
    CHECK(result.report.final_loss < 1e-3);
  }

  TEST_CASE("training is deterministic and full-batch order does not matter") {
    Rng rng(16);
    PredictorModel shape = make_model(8, 2, std::vector<std::size_t>{6}, two_metrics(), 0);
    std::vector<TrainingExample> examples;
    for (int i = 0; i < 12; ++i) examples.push_back(random_example(shape, rng, "p" + std::to_string(i)));
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.hidden_sizes = {6};
    cfg.d_c = 2;
    cfg.seed = 77;
    const auto a = train(examples, two_metrics(), cfg);
    const auto b = train(examples, two_metrics(), cfg);
    CHECK(a.model.params.flatten() == b.model.params.flatten());

    auto set = TrainingSet::from_examples(examples);
    std::vector<std::size_t> rows(set.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto g1 = a.model.params.zeros_like();
    const double l1 = batch_loss_and_gradient(a.model, set, rows, &g1);
    std::reverse(rows.begin(), rows.end());
    auto g2 = a.model.params.zeros_like();
    const double l2 = batch_loss_and_gradient(a.model, set, rows, &g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    const auto f1 = g1.flatten();
    const auto f2 = g2.flatten();
    for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == doctest::Approx(f2[i]).epsilon(1e-10).scale(1.0));
  }

  TEST_CASE("training errors") {
    Rng rng(17);
    PredictorModel shape = make_model(4, 2, {}, two_metrics(), 0);
    std::vector<TrainingExample> examples = {random_example(shape, rng, "a")};
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    cfg.epochs = 1;
    const MetricSchema three({"a", "b", "c"}, {Direction::kHigherBetter, Direction::kHigherBetter,
                                               Direction::kHigherBetter});
    CHECK(error_code([&] { train(examples, three, cfg); }) == ErrorCode::kSchemaMismatch);

    auto bad = examples;
    bad[0].target[0] = std::nan("");
    CHECK(error_code([&] { train(bad, two_metrics(), cfg); }) == ErrorCode::kInvalidArgument);

    auto diverging = cfg;
    diverging.learning_rate = 1e200;
    diverging.epochs = 5;
    const std::vector<TrainingExample> two = {random_example(shape, rng, "a"), random_example(shape, rng, "b")};
    CHECK(error_code([&] { train(two, two_metrics(), diverging); }) == ErrorCode::kNonFiniteLoss);

    CHECK(error_code([&] { train(std::vector<TrainingExample>{}, two_metrics(), cfg); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("model files round-trip") {
    testing::TempDir dir;
    Rng rng(18);
    PredictorModel model = make_model(12, 3, std::vector<std::size_t>{9, 5}, two_metrics(), 19);
    model.feature_norm = rough_norm();
    model.char_lm = lm();
    model.lexicon_fingerprint = testing::lexicon().fingerprint();
    model.output_scaling.shift = Eigen::Vector2d(-3.5, 0.25);
    model.output_scaling.scale = Eigen::Vector2d(12.0, 0.1);
    save_model(model, dir / "m.json");
    const auto loaded = load_model(dir / "m.json");
    CHECK(loaded.params.flatten() == model.params.flatten());
    CHECK(loaded.metric_schema == model.metric_schema);
    CHECK(loaded.feature_norm.means == model.feature_norm.means);
    CHECK(loaded.lexicon_fingerprint == model.lexicon_fingerprint);
    CHECK(loaded.output_scaling.shift == model.output_scaling.shift);
    CHECK(loaded.output_scaling.scale == model.output_scaling.scale);
    REQUIRE(loaded.char_lm.has_value());
    CHECK(loaded.char_lm->perplexity("a red car") == model.char_lm->perplexity("a red car"));
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd h(model.input_dim());
      for (auto& x : h) x = rng.normal();
      CHECK(predict(loaded, {h}) == predict(model, {h}));
    }
  }

  TEST_CASE("model file errors") {
    testing::TempDir dir;
    const auto model = make_model(4, 2, std::vector<std::size_t>{3}, two_metrics(), 20);
    save_model(model, dir / "m.json");
    const auto text = testing::read_file(dir / "m.json");

    testing::write_file(dir / "trunc.json", text.substr(0, text.size() / 2));
    CHECK(error_code([&] { load_model(dir / "trunc.json"); }) == ErrorCode::kFormatError);

    auto old = text;
    old.replace(old.find("model.v1"), 8, "model.v0");
    testing::write_file(dir / "old.json", old);
    CHECK(error_code([&] { load_model(dir / "old.json"); }) == ErrorCode::kVersionMismatch);

    auto count = text;
    const auto at = count.find("\"param_count\":");
    count.insert(at + 14, "1");
    testing::write_file(dir / "count.json", count);
    CHECK(error_code([&] { load_model(dir / "count.json"); }) == ErrorCode::kFormatError);

    CHECK(error_code([&] { load_model(dir / "missing.json"); }) == ErrorCode::kIoError);
  }
}
