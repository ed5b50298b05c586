#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "gsadvisor/random.hpp"
#include "gsadvisor/selector.hpp"
#include "test_support.hpp"

using namespace gsadvisor;
using testing::error_code;

namespace {

std::vector<QualityVector> random_predictions(std::size_t count, std::size_t d_q, Rng& rng) {
  std::vector<QualityVector> out(count, QualityVector(static_cast<Eigen::Index>(d_q)));
  for (auto& q : out)
    for (auto& x : q) x = rng.normal();
  return out;
}

UtilityConfig random_config(std::size_t d_q, Rng& rng) {
  UtilityConfig cfg = UtilityConfig::uniform(d_q);
  for (auto& w : cfg.weights) w = rng.uniform(0.0, 1.0);
  cfg.anchor = rng.uniform(0.5, 13.0);
  return cfg;
}

Eigen::VectorXd random_distribution(std::size_t n, Rng& rng) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  for (auto& x : p) x = rng.uniform(0.01, 1.0);
  return p / p.sum();
}

}  // namespace

TEST_SUITE("selector") {
  TEST_CASE("utility examples") {
    UtilityConfig cfg;
    cfg.weights = Eigen::VectorXd::Ones(1);
    cfg.alpha = 0.0;
    for (double s : {1.0, 5.0, 11.0}) CHECK(utility(QualityVector::Constant(1, 2.0), s, cfg) == 2.0);

    cfg.weights = Eigen::VectorXd::Zero(1);
    cfg.alpha = 1.0;
    cfg.anchor = 5.0;
    CHECK(utility(QualityVector::Constant(1, 7.0), 3.0, cfg) == -4.0);

    cfg.weights = Eigen::VectorXd::Constant(2, 0.5);
    for (double a : {0.0, 0.3, 1e9}) {
      cfg.alpha = a;
      CHECK(utility(QualityVector(Eigen::Vector2d(1.0, 3.0)), 5.0, cfg) == 2.0);
    }
    CHECK(error_code([&] { utility(QualityVector::Zero(3), 5.0, cfg); }) == ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("config validation") {
    UtilityConfig cfg = UtilityConfig::uniform(4);
    CHECK(cfg.weights == Eigen::VectorXd::Constant(4, 0.25));
    cfg.weights[1] = -0.1;
    CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
    cfg = UtilityConfig::uniform(4, -1.0);
    CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
    cfg = UtilityConfig::uniform(4, 0.05, 0.0);
    CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("grid construction") {
    const ScaleGrid g({3.0, 1.0, 2.0});
    CHECK(g.scales() == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(ScaleGrid::image_default().size() == 12);
    CHECK(ScaleGrid::image_default()[11] == 12.0);
    const auto audio = ScaleGrid::audio_default();
    CHECK(audio.size() == 11);
    CHECK(audio[1] == 1.5);
    CHECK(audio[10] == 6.0);
    CHECK(error_code([] { ScaleGrid({}); }) == ErrorCode::kInvalidArgument);
    CHECK(error_code([] { ScaleGrid({1.0, 1.0}); }) == ErrorCode::kInvalidArgument);
    CHECK(error_code([] { ScaleGrid({0.0, 1.0}); }) == ErrorCode::kInvalidArgument);
    CHECK(error_code([] { ScaleGrid({1.0, std::nan("")}); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("identical predictions leave the penalty to decide") {
    const auto grid = ScaleGrid::image_default();
    const std::vector<QualityVector> same(grid.size(), QualityVector(Eigen::Vector2d(0.3, -1.0)));
    for (double anchor : {5.0, 7.4, 0.2, 30.0}) {
      const auto r = select_from_predictions(grid, same, UtilityConfig::uniform(2, 0.05, anchor));
      const double expected = std::clamp(std::round(anchor), 1.0, 12.0);
      CHECK(r.chosen_scale == expected);
      CHECK_FALSE(r.tie_broken);
    }
    // Midway between two grid points: both tie, the smaller one wins.
    const auto r = select_from_predictions(grid, same, UtilityConfig::uniform(2, 0.05, 6.5));
    CHECK(r.chosen_scale == 6.0);
    CHECK(r.tie_broken);
  }

  TEST_CASE("huge alpha picks the grid point nearest the anchor") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> scales;
      for (int i = 0; i < 10; ++i) scales.push_back(std::round(rng.uniform(0.5, 15.0) * 100.0) / 100.0 + i * 1e-3);
      const ScaleGrid grid(scales);
      auto cfg = random_config(3, rng);
      cfg.alpha = 1e9;
      const auto r = select_from_predictions(grid, random_predictions(grid.size(), 3, rng), cfg);
      double best = grid[0];
      for (double s : grid.scales()) {
        if (std::abs(s - cfg.anchor) < std::abs(best - cfg.anchor)) best = s;
      }
      CHECK(r.chosen_scale == best);
    }
  }

  TEST_CASE("penalty is monotone in alpha") {
    Rng rng(32);
    const auto grid = ScaleGrid::image_default();
    for (int trial = 0; trial < 200; ++trial) {
      const auto preds = random_predictions(grid.size(), 4, rng);
      auto cfg = random_config(4, rng);
      double previous = INFINITY;
      for (double a : {0.0, 0.01, 0.1, 1.0, 10.0}) {
        cfg.alpha = a;
        const double d = std::abs(select_from_predictions(grid, preds, cfg).chosen_scale - cfg.anchor);
        CHECK(d <= previous);
        previous = d;
      }
    }
  }

  TEST_CASE("adding a constant to every prediction keeps the argmax") {
    Rng rng(33);
    const auto grid = ScaleGrid::image_default();
    for (int trial = 0; trial < 200; ++trial) {
      auto preds = random_predictions(grid.size(), 4, rng);
      const auto cfg = random_config(4, rng);
      const double before = select_from_predictions(grid, preds, cfg).chosen_scale;
      const double c = rng.uniform(-50.0, 50.0);
      for (auto& q : preds) q.array() += c;
      CHECK(select_from_predictions(grid, preds, cfg).chosen_scale == before);
    }
  }

  TEST_CASE("selection reports every scale and matches brute force") {
    Rng rng(34);
    const auto grid = ScaleGrid::image_default();
    const auto preds = random_predictions(grid.size(), 2, rng);
    const auto cfg = random_config(2, rng);
    const auto r = select_from_predictions(grid, preds, cfg);
    REQUIRE(r.utilities.size() == grid.size());
    CHECK(r.scales == grid.scales());
    std::size_t best = 0;
    std::vector<double> u;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double value = cfg.weights.dot(preds[i]) - cfg.alpha * (grid[i] - cfg.anchor) * (grid[i] - cfg.anchor);
      u.push_back(value);
      if (value > u[best]) best = i;
    }
    CHECK(r.chosen_scale == grid[best]);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(r.utilities[i] == doctest::Approx(u[i]).epsilon(1e-14));
    CHECK(error_code([&] { select_from_predictions(grid, std::span(preds).first(3), cfg); }) ==
          ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("select_scale is invariant to input grid order") {
    PredictorModel model = make_model(8, 2, std::vector<std::size_t>{6}, MetricSchema::parse("clip:higher,fid:lower"), 40);
    Rng rng(35);
    Eigen::VectorXd v(8);
    for (auto& x : v) x = rng.normal();
    const SemanticEmbedding e{v.normalized(), EmbeddingSource::kHashed, ""};
    const ComplexityFeatures f;
    const auto cfg = UtilityConfig::uniform(2, 0.0);
    const auto a = select_scale(model, e, f, ScaleGrid({1, 2, 3, 4, 5, 6}), cfg);
    const auto b = select_scale(model, e, f, ScaleGrid({6, 2, 4, 1, 5, 3}), cfg);
    CHECK(a.chosen_scale == b.chosen_scale);
    CHECK(a.utilities == b.utilities);
  }

  TEST_CASE("report line layout") {
    const auto grid = ScaleGrid({2.0, 4.0});
    const std::vector<QualityVector> preds = {QualityVector::Constant(1, 1.0), QualityVector::Constant(1, 3.0)};
    const auto r = select_from_predictions(grid, preds, UtilityConfig::uniform(1, 0.0));
    const auto j = nlohmann::json::parse(selection_report_line("p7", r));
    CHECK(j["id"] == "p7");
    CHECK(j["chosen_scale"] == 4.0);
    CHECK(j["tie_broken"] == false);
    REQUIRE(j["utilities"].size() == 2);
    CHECK(j["utilities"][1]["scale"] == 4.0);
    CHECK(j["utilities"][1]["utility"] == 3.0);
    CHECK(j["utilities"][1]["q_hat"] == nlohmann::json::array({3.0}));
  }

  TEST_CASE("cfg combine") {
    const NoisePrediction np{Eigen::Vector2d(2, 0), Eigen::Vector2d(0, 2)};
    CHECK(cfg_combine(np, 5.0) == Eigen::Vector2d(10, -8));
    Rng rng(36);
    for (int i = 0; i < 1000; ++i) {
      NoisePrediction r{Eigen::VectorXd(16), Eigen::VectorXd(16)};
      for (auto& x : r.cond) x = rng.normal();
      for (auto& x : r.uncond) x = rng.normal();
      CHECK(cfg_combine(r, 1.0) == r.cond);
      CHECK(cfg_combine(r, 0.0) == r.uncond);
      const double w = rng.uniform(-2.0, 15.0);
      const Eigen::VectorXd got = cfg_combine(r, w);
      for (Eigen::Index k = 0; k < 16; ++k) {
        CHECK(std::abs(got[k] - (r.uncond[k] + w * (r.cond[k] - r.uncond[k]))) < 1e-12);
      }
    }
    const NoisePrediction bad{Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)};
    CHECK(error_code([&] { cfg_combine(bad, 2.0); }) == ErrorCode::kDimensionMismatch);
    const NoisePrediction nan{Eigen::Vector2d(std::nan(""), 0), Eigen::Vector2d(1, 0)};
    CHECK(error_code([&] { cfg_combine(nan, 2.0); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("tilt examples") {
    const Eigen::Vector2d pc(0.8, 0.2);
    const Eigen::Vector2d pm(0.5, 0.5);
    const auto t = tilt_distribution(pc, pm, 1.0);
    // 0.8 * 1.6 = 1.28 and 0.2 * 0.4 = 0.08, so the mass splits 1.28 : 0.08.
    CHECK(t[0] == doctest::Approx(1.28 / 1.36).epsilon(1e-14));
    CHECK(t[1] == doctest::Approx(0.08 / 1.36).epsilon(1e-14));
    CHECK(t[0] == doctest::Approx(0.941).epsilon(1e-3));
    CHECK(tilt_distribution(pc, pm, 0.0) == Eigen::VectorXd(pc));
    const auto same = tilt_distribution(pc, pc, 3.7);
    CHECK(std::abs(same[0] - 0.8) < 1e-15);
    CHECK(std::abs(same[1] - 0.2) < 1e-15);
  }

  TEST_CASE("tilt sharpens and stays normalized") {
    Rng rng(37);
    for (int i = 0; i < 1000; ++i) {
      const std::size_t n = 2 + rng.below(12);
      const auto pc = random_distribution(n, rng);
      const auto pm = random_distribution(n, rng);
      CHECK(tilt_distribution(pc, pm, 0.0) == pc);
      Eigen::Index top = 0;
      (pc.array() / pm.array()).maxCoeff(&top);
      double previous = -1.0;
      for (double s : {0.0, 0.25, 1.0, 2.0, 5.0, 20.0}) {
        const auto t = tilt_distribution(pc, pm, s);
        CHECK(std::abs(t.sum() - 1.0) < 1e-9);
        CHECK(t[top] >= previous - 1e-15);
        previous = t[top];
      }
    }
  }

  TEST_CASE("tilt errors") {
    CHECK(error_code([] { tilt_distribution(Eigen::Vector2d(0.5, 0.5), Eigen::Vector3d(0.2, 0.3, 0.5), 1.0); }) ==
          ErrorCode::kSupportMismatch);
    CHECK(error_code([] { tilt_distribution(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.0, 0.0), 1.0); }) ==
          ErrorCode::kDivisionByZero);
    CHECK(error_code([] { tilt_distribution(Eigen::Vector2d(0.5, 0.6), Eigen::Vector2d(0.5, 0.5), 1.0); }) ==
          ErrorCode::kInvalidArgument);
    CHECK(error_code([] { tilt_distribution(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5), -1.0); }) ==
          ErrorCode::kInvalidArgument);
    // Zero conditional mass needs no marginal support.
    const auto t = tilt_distribution(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(1.0, 0.0), 2.0);
    CHECK(t == Eigen::Vector2d(1.0, 0.0));
  }
}
