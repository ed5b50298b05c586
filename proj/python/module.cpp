#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gsadvisor/cli/commands.hpp"
#include "gsadvisor/cli/config.hpp"
#include "gsadvisor/error.hpp"
#include "gsadvisor/evaluation.hpp"
#include "gsadvisor/featurizer.hpp"
#include "gsadvisor/selector.hpp"
#include "gsadvisor/text_features.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace gsadvisor;

namespace {

// A trained model plus the featurizer it was fitted with.
class Advisor {
 public:
  Advisor(const fs::path& model_path, const fs::path& lexicon_path)
      : model_(load_model(model_path)),
        featurizer_(PromptFeaturizer::for_model(model_, ModifierLexicon::load(lexicon_path),
                                                EmbeddingProvider(model_.embedding.dim))) {}

  SelectionResult select(const std::string& text, const std::vector<double>& grid, double alpha, double anchor,
                         std::optional<Eigen::VectorXd> weights) const {
    UtilityConfig config = UtilityConfig::uniform(model_.output_dim(), alpha, anchor);
    if (weights) config.weights = *weights;
    const ScaleGrid scale_grid(grid);
    const PromptInput input = featurizer_.featurize({"prompt", text});
    return select_from_predictions(scale_grid, predict_grid(model_, input, scale_grid), config);
  }

  std::vector<std::string> metrics() const { return model_.metric_schema.names(); }
  std::size_t param_count() const { return model_.param_count(); }

 private:
  PredictorModel model_;
  PromptFeaturizer featurizer_;
};

py::dict features_dict(const ComplexityFeatures& f) {
  py::dict d;
  const auto values = f.values();
  for (std::size_t i = 0; i < ComplexityFeatures::kDim; ++i) d[py::str(std::string(ComplexityFeatures::kNames[i]))] = values[i];
  return d;
}

}  // namespace

PYBIND11_MODULE(_gsadvisor, m) {
  m.doc() = "Per-prompt guidance scale selection";

  static py::exception<Error> error(m, "GsadvisorError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.attr("DEFAULT_ALPHA") = kDefaultAlpha;
  m.attr("DEFAULT_ANCHOR") = kImageDefaultAnchor;
  m.attr("PARAM_BUDGET") = kParamBudget;

  m.def(
      "cfg_combine",
      [](const Eigen::VectorXd& cond, const Eigen::VectorXd& uncond, double scale) {
        return cfg_combine({cond, uncond}, scale);
      },
      py::arg("cond"), py::arg("uncond"), py::arg("scale"));
  m.def("tilt_distribution", &tilt_distribution, py::arg("p_cond"), py::arg("p_marg"), py::arg("s"));

  m.def(
      "utility",
      [](const Eigen::VectorXd& q_hat, double scale, const Eigen::VectorXd& weights, double alpha, double anchor) {
        return utility(q_hat, scale, UtilityConfig{weights, alpha, anchor});
      },
      py::arg("q_hat"), py::arg("scale"), py::arg("weights"), py::arg("alpha") = kDefaultAlpha,
      py::arg("anchor") = kImageDefaultAnchor);

  py::class_<SelectionResult>(m, "SelectionResult")
      .def_readonly("chosen_scale", &SelectionResult::chosen_scale)
      .def_readonly("scales", &SelectionResult::scales)
      .def_readonly("utilities", &SelectionResult::utilities)
      .def_readonly("predicted_quality", &SelectionResult::predicted_quality)
      .def_readonly("tie_broken", &SelectionResult::tie_broken)
      .def("__repr__", [](const SelectionResult& r) {
        std::ostringstream s;
        s << "SelectionResult(chosen_scale=" << r.chosen_scale << ")";
        return s.str();
      });

  m.def(
      "select_from_predictions",
      [](const std::vector<double>& grid, const std::vector<Eigen::VectorXd>& predictions,
         std::optional<Eigen::VectorXd> weights, double alpha, double anchor) {
        const std::size_t d_q = predictions.empty() ? 0 : static_cast<std::size_t>(predictions.front().size());
        UtilityConfig config = UtilityConfig::uniform(d_q, alpha, anchor);
        if (weights) config.weights = *weights;
        return select_from_predictions(ScaleGrid(grid), predictions, config);
      },
      py::arg("grid"), py::arg("predictions"), py::arg("weights") = py::none(), py::arg("alpha") = kDefaultAlpha,
      py::arg("anchor") = kImageDefaultAnchor);

  m.def("tokenize", [](const std::string& text) { return tokenize(text).tokens; }, py::arg("text"));
  m.def(
      "complexity_features",
      [](const std::string& text, const std::vector<std::string>& lm_corpus, const fs::path& lexicon) {
        return features_dict(
            complexity_features(tokenize(text), train_char_lm(lm_corpus), ModifierLexicon::load(lexicon)));
      },
      py::arg("text"), py::arg("lm_corpus"), py::arg("lexicon"));

  py::class_<Advisor>(m, "Advisor")
      .def(py::init<const fs::path&, const fs::path&>(), py::arg("model"), py::arg("lexicon"))
      .def("select", &Advisor::select, py::arg("text"), py::arg("grid"), py::arg("alpha") = kDefaultAlpha,
           py::arg("anchor") = kImageDefaultAnchor, py::arg("weights") = py::none())
      .def_property_readonly("metrics", &Advisor::metrics)
      .def_property_readonly("param_count", &Advisor::param_count);

  m.def(
      "run_command",
      [](const std::string& command, const fs::path& config_path, std::optional<fs::path> lexicon) {
        cli::RunConfig config = cli::load_config(config_path);
        if (lexicon && !fs::exists(config.paths.lexicon)) config.paths.lexicon = *lexicon;
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_command(command, config, {out, err});
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("command"), py::arg("config"), py::arg("lexicon") = py::none());
}
