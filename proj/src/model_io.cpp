#include <cmath>
#include <fstream>
#include <sstream>

#include "gsadvisor/error.hpp"
#include "gsadvisor/predictor.hpp"
#include "json.hpp"

namespace gsadvisor {
namespace {

using nlohmann::json;

json char_lm_to_json(const CharNgramModel& lm) {
  json counts = json::array();
  for (const auto& [context, successors] : lm.counts()) {
    json ctx = json::array();
    for (unsigned char c : context) ctx.push_back(static_cast<int>(c));
    json next = json::array();
    for (const auto& [c, n] : successors) next.push_back({static_cast<int>(c), n});
    counts.push_back({{"ctx", ctx}, {"next", next}});
  }
  json alphabet = json::array();
  for (unsigned char c : lm.alphabet()) alphabet.push_back(static_cast<int>(c));
  return {{"order", lm.order()}, {"smoothing_k", lm.smoothing_k()}, {"alphabet", alphabet}, {"counts", counts}};
}

unsigned char byte_of(const json& v) {
  const int b = v.get<int>();
  if (b < 0 || b > 255) throw Error(ErrorCode::kFormatError, "character code out of range");
  return static_cast<unsigned char>(b);
}

CharNgramModel char_lm_from_json(const json& j) {
  std::set<unsigned char> alphabet;
  for (const auto& c : j.at("alphabet")) alphabet.insert(byte_of(c));
  CharNgramModel::CountTable counts;
  for (const auto& entry : j.at("counts")) {
    std::string context;
    for (const auto& c : entry.at("ctx")) context.push_back(static_cast<char>(byte_of(c)));
    auto& successors = counts[context];
    for (const auto& pair : entry.at("next")) successors[byte_of(pair.at(0))] = pair.at(1).get<std::uint64_t>();
  }
  return CharNgramModel(j.at("order").get<int>(), j.at("smoothing_k").get<double>(), std::move(alphabet),
                        std::move(counts));
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

void save_model(const PredictorModel& model, const std::filesystem::path& path) {
  std::vector<std::string> directions;
  for (auto d : model.metric_schema.directions()) directions.emplace_back(to_string(d));

  const auto params = model.params.flatten();
  for (double p : params) {
    if (!std::isfinite(p)) throw Error(ErrorCode::kInvalidArgument, "refusing to save non-finite parameters");
  }

  json doc;
  doc["schema"] = kModelSchema;
  doc["d_e"] = model.d_e;
  doc["d_c"] = model.d_c;
  doc["layer_sizes"] = model.layer_sizes;
  doc["activation"] = to_string(model.activation);
  doc["feature_norm"] = {
      {"names", model.feature_norm.names}, {"means", model.feature_norm.means}, {"stds", model.feature_norm.stds}};
  doc["metric_schema"] = {{"names", model.metric_schema.names()}, {"directions", directions}};
  if (!model.output_scaling.identity()) {
    const auto& o = model.output_scaling;
    doc["output_scaling"] = {{"shift", std::vector<double>(o.shift.data(), o.shift.data() + o.shift.size())},
                             {"scale", std::vector<double>(o.scale.data(), o.scale.data() + o.scale.size())}};
  }
  doc["params"] = params;
  doc["param_count"] = params.size();
  doc["embedding"] = {{"source", model.embedding.source == EmbeddingSource::kFile ? "file" : "hashed"},
                      {"dim", model.embedding.dim},
                      {"encoder", model.embedding.encoder}};
  if (model.char_lm) doc["char_lm"] = char_lm_to_json(*model.char_lm);
  if (model.lexicon_fingerprint) doc["lexicon_fingerprint"] = hex64(*model.lexicon_fingerprint);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write model file " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

PredictorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_string()) {
    throw Error(ErrorCode::kFormatError, path.string() + ": missing schema tag");
  }
  const auto schema_tag = doc["schema"].get<std::string>();
  if (schema_tag != kModelSchema) {
    if (schema_tag.rfind("model.", 0) == 0) {
      throw Error(ErrorCode::kVersionMismatch,
                  path.string() + ": file is " + schema_tag + ", reader expects " + std::string(kModelSchema));
    }
    throw Error(ErrorCode::kFormatError, path.string() + ": unknown schema " + schema_tag);
  }

  try {
    const auto names = doc.at("metric_schema").at("names").get<std::vector<std::string>>();
    std::vector<Direction> directions;
    for (const auto& d : doc.at("metric_schema").at("directions")) {
      directions.push_back(parse_direction(d.get<std::string>()));
    }
    const MetricSchema schema(names, directions);
    const auto d_e = doc.at("d_e").get<std::size_t>();
    const auto d_c = doc.at("d_c").get<std::size_t>();
    const auto layer_sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    if (layer_sizes.size() < 2 || layer_sizes.front() != d_e + d_c + 1 || layer_sizes.back() != schema.size()) {
      throw Error(ErrorCode::kFormatError, "layer_sizes inconsistent with d_e, d_c, and metric schema");
    }
    const std::vector<std::size_t> hidden(layer_sizes.begin() + 1, layer_sizes.end() - 1);

    PredictorModel model = make_model(d_e, d_c, hidden, schema, 0);
    model.activation = parse_activation(doc.at("activation").get<std::string>());

    const auto param_count = doc.at("param_count").get<std::size_t>();
    const auto params = doc.at("params").get<std::vector<double>>();
    if (param_count != model.param_count() || params.size() != param_count) {
      throw Error(ErrorCode::kFormatError, "param_count " + std::to_string(param_count) + " with " +
                                               std::to_string(params.size()) + " values does not match layout of " +
                                               std::to_string(model.param_count()));
    }
    model.params.assign(params);

    FeatureNormalization norm;
    norm.names = doc.at("feature_norm").at("names").get<std::vector<std::string>>();
    norm.means = doc.at("feature_norm").at("means").get<std::vector<double>>();
    norm.stds = doc.at("feature_norm").at("stds").get<std::vector<double>>();
    const auto expected = FeatureNormalization::identity().names;
    if (norm.names != expected || norm.means.size() != expected.size() || norm.stds.size() != expected.size()) {
      throw Error(ErrorCode::kFormatError, "feature_norm does not match the complexity feature schema");
    }
    model.feature_norm = std::move(norm);

    if (auto it = doc.find("output_scaling"); it != doc.end()) {
      const auto shift = it->at("shift").get<std::vector<double>>();
      const auto scale = it->at("scale").get<std::vector<double>>();
      if (shift.size() != schema.size() || scale.size() != schema.size()) {
        throw Error(ErrorCode::kFormatError, "output_scaling needs one shift and scale per metric");
      }
      model.output_scaling.shift = Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
      model.output_scaling.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    }

    if (auto it = doc.find("embedding"); it != doc.end()) {
      model.embedding.source = it->at("source").get<std::string>() == "file" ? EmbeddingSource::kFile
                                                                             : EmbeddingSource::kHashed;
      model.embedding.dim = it->at("dim").get<std::size_t>();
      model.embedding.encoder = it->value("encoder", "");
    }
    if (auto it = doc.find("char_lm"); it != doc.end()) model.char_lm = char_lm_from_json(*it);
    if (auto it = doc.find("lexicon_fingerprint"); it != doc.end()) {
      model.lexicon_fingerprint = std::stoull(it->get<std::string>(), nullptr, 16);
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormatError) throw;
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
}

}  // namespace gsadvisor
