#include "gsadvisor/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gsadvisor/error.hpp"

#ifndef GSADVISOR_DEFAULT_LEXICON
#define GSADVISOR_DEFAULT_LEXICON "modifiers.txt"
#endif

namespace gsadvisor::cli {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing '#' comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

json parse_value(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    if (!text.empty() && (text.front() == '[' || text.front() == '"' || text.front() == '{')) throw;
    return std::string(text);  // bare word
  }
}

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "config key " + key + " has the wrong type: " + v.dump());
  }
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw Error(ErrorCode::kInvalidArgument, "config key " + key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

Setter path_setter(std::filesystem::path RunConfig::Paths::*field) {
  return [field](RunConfig& c, const json& v, const std::string& key) {
    c.paths.*field = as<std::string>(v, key);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.seed = as<std::uint64_t>(v, k); }},
      {"metrics", [](RunConfig& c, const json& v, const std::string& k) { c.metrics = as<std::string>(v, k); }},

      {"paths.prompts", path_setter(&RunConfig::Paths::prompts)},
      {"paths.embeddings", path_setter(&RunConfig::Paths::embeddings)},
      {"paths.dataset", path_setter(&RunConfig::Paths::dataset)},
      {"paths.model", path_setter(&RunConfig::Paths::model)},
      {"paths.selection", path_setter(&RunConfig::Paths::selection)},
      {"paths.select_prompts", path_setter(&RunConfig::Paths::select_prompts)},
      {"paths.evaluation", path_setter(&RunConfig::Paths::evaluation)},
      {"paths.eval_prompts", path_setter(&RunConfig::Paths::eval_prompts)},
      {"paths.eval_dataset", path_setter(&RunConfig::Paths::eval_dataset)},
      {"paths.report", path_setter(&RunConfig::Paths::report)},
      {"paths.journal", path_setter(&RunConfig::Paths::journal)},
      {"paths.lexicon", path_setter(&RunConfig::Paths::lexicon)},

      {"sweep.grid",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.sweep.grid = v.is_string() ? parse_grid(v.get<std::string>()) : as<std::vector<double>>(v, k);
       }},
      {"sweep.samples_per_pair",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep.samples_per_pair = as_count(v, k); }},
      {"sweep.workers", [](RunConfig& c, const json& v, const std::string& k) { c.sweep.workers = as_count(v, k); }},
      {"sweep.max_retries",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep.max_retries = as_count(v, k); }},
      {"sweep.provider",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep.provider = as<std::string>(v, k); }},
      {"sweep.connect_timeout_ms",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep.connect_timeout_ms = as<std::int64_t>(v, k); }},
      {"sweep.read_timeout_ms",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep.read_timeout_ms = as<std::int64_t>(v, k); }},

      {"synthetic.omega_min",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.omega_min = as<double>(v, k); }},
      {"synthetic.omega_max",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.omega_max = as<double>(v, k); }},
      {"synthetic.noise_std",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.noise_std = as<double>(v, k); }},
      {"synthetic.peak_heights",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.synthetic.peak_heights = as<std::vector<double>>(v, k);
       }},
      {"synthetic.curvatures",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.synthetic.curvatures = as<std::vector<double>>(v, k);
       }},
      {"synthetic.offsets",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.offsets = as<std::vector<double>>(v, k); }},
      {"synthetic.length_floor",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.length_floor = as<double>(v, k); }},
      {"synthetic.length_saturation",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.length_saturation = as<double>(v, k); }},
      {"synthetic.modifier_saturation",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.modifier_saturation = as<double>(v, k); }},
      {"synthetic.length_weight",
       [](RunConfig& c, const json& v, const std::string& k) { c.synthetic.length_weight = as<double>(v, k); }},

      {"train.epochs", [](RunConfig& c, const json& v, const std::string& k) { c.train.epochs = as_count(v, k); }},
      {"train.batch_size",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.batch_size = as_count(v, k); }},
      {"train.learning_rate",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.learning_rate = as<double>(v, k); }},
      {"train.hidden",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.hidden = as<std::vector<std::size_t>>(v, k); }},
      {"train.complexity_dim",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.complexity_dim = as_count(v, k); }},
      {"train.lm_order", [](RunConfig& c, const json& v, const std::string& k) { c.train.lm_order = as<int>(v, k); }},
      {"train.lm_smoothing",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.lm_smoothing = as<double>(v, k); }},

      {"utility.alpha", [](RunConfig& c, const json& v, const std::string& k) { c.utility.alpha = as<double>(v, k); }},
      {"utility.anchor",
       [](RunConfig& c, const json& v, const std::string& k) { c.utility.anchor = as<double>(v, k); }},
      {"utility.weights",
       [](RunConfig& c, const json& v, const std::string& k) { c.utility.weights = as<std::vector<double>>(v, k); }},

      {"embedding.hashed_dim",
       [](RunConfig& c, const json& v, const std::string& k) { c.embedding.hashed_dim = as_count(v, k); }},
      {"embedding.fallback",
       [](RunConfig& c, const json& v, const std::string& k) { c.embedding.fallback = as<bool>(v, k); }},

      {"evaluate.truth",
       [](RunConfig& c, const json& v, const std::string& k) { c.evaluate.truth = as<std::string>(v, k); }},
      {"evaluate.subset",
       [](RunConfig& c, const json& v, const std::string& k) {
         if (v.is_string()) {
           c.evaluate.subset.clear();
           std::stringstream ss(v.get<std::string>());
           for (std::string item; std::getline(ss, item, ',');) {
             if (auto t = trim(item); !t.empty()) c.evaluate.subset.emplace_back(t);
           }
         } else {
           c.evaluate.subset = as<std::vector<std::string>>(v, k);
         }
       }},

      {"prompts.count", [](RunConfig& c, const json& v, const std::string& k) { c.prompts.count = as_count(v, k); }},
      {"prompts.first_index",
       [](RunConfig& c, const json& v, const std::string& k) { c.prompts.first_index = as_count(v, k); }},
  };
  return table;
}

void resolve_paths(RunConfig& c, const std::filesystem::path& base) {
  for (auto* p : {&c.paths.prompts, &c.paths.embeddings, &c.paths.dataset, &c.paths.model, &c.paths.selection,
                  &c.paths.select_prompts, &c.paths.evaluation, &c.paths.eval_prompts, &c.paths.eval_dataset, &c.paths.report,
                  &c.paths.journal, &c.paths.lexicon}) {
    if (!p->empty() && p->is_relative() && !base.empty()) *p = base / *p;
  }
  if (c.paths.lexicon.empty()) c.paths.lexicon = GSADVISOR_DEFAULT_LEXICON;
}

}  // namespace

SyntheticOracleParams RunConfig::synthetic_params() const {
  const std::size_t d_q = metric_schema().size();
  SyntheticOracleParams p = SyntheticOracleParams::defaults(d_q);
  auto take = [d_q](const std::vector<double>& values, Eigen::VectorXd& into, const char* name) {
    if (values.empty()) return;
    if (values.size() != d_q) {
      throw Error(ErrorCode::kDimensionMismatch,
                  std::string("synthetic.") + name + " needs one value per metric (" + std::to_string(d_q) + ")");
    }
    into = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(d_q));
  };
  take(synthetic.peak_heights, p.peak_heights, "peak_heights");
  take(synthetic.curvatures, p.curvatures, "curvatures");
  take(synthetic.offsets, p.offsets, "offsets");
  p.omega_min = synthetic.omega_min;
  p.omega_max = synthetic.omega_max;
  p.noise_std = synthetic.noise_std;
  p.length_floor = synthetic.length_floor;
  p.length_saturation = synthetic.length_saturation;
  p.modifier_saturation = synthetic.modifier_saturation;
  p.length_weight = synthetic.length_weight;
  p.validate(d_q);
  return p;
}

UtilityConfig RunConfig::utility_config() const {
  const std::size_t d_q = metric_schema().size();
  UtilityConfig u = UtilityConfig::uniform(d_q, utility.alpha, utility.anchor);
  if (!utility.weights.empty()) {
    if (utility.weights.size() != d_q) {
      throw Error(ErrorCode::kDimensionMismatch, "utility.weights needs one value per metric");
    }
    u.weights = Eigen::Map<const Eigen::VectorXd>(utility.weights.data(), static_cast<Eigen::Index>(d_q));
  }
  u.validate();
  return u;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = train.epochs;
  t.batch_size = train.batch_size;
  t.learning_rate = train.learning_rate;
  t.hidden_sizes = train.hidden;
  t.d_c = train.complexity_dim;
  t.seed = seed;
  return t;
}

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw Error(ErrorCode::kInvalidArgument, "cannot parse grid entry '" + std::string(item) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::kInvalidArgument, where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidArgument, where + ": expected key = value");
    const auto name = trim(line.substr(0, eq));
    const std::string key = section.empty() ? std::string(name) : section + "." + std::string(name);
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::kInvalidArgument, where + ": unknown key " + key);
    json value;
    try {
      value = parse_value(trim(line.substr(eq + 1)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument, where + ": " + e.what());
    }
    it->second(config, value, key);
  }
  resolve_paths(config, base_dir);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

void apply_overrides(RunConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.grid) config.sweep.grid = *overrides.grid;
  if (overrides.alpha) config.utility.alpha = *overrides.alpha;
  if (overrides.anchor) config.utility.anchor = *overrides.anchor;
  if (overrides.provider) config.sweep.provider = *overrides.provider;
  if (overrides.out) config.out = *overrides.out;
}

json to_json(const RunConfig& c) {
  auto str = [](const std::filesystem::path& p) { return p.string(); };
  json j;
  j["seed"] = c.seed;
  j["metrics"] = c.metrics;
  j["paths"] = {{"prompts", str(c.paths.prompts)},           {"embeddings", str(c.paths.embeddings)},
                {"dataset", str(c.paths.dataset)},           {"model", str(c.paths.model)},
                {"selection", str(c.paths.selection)},       {"select_prompts", str(c.paths.select_prompts)},
                {"evaluation", str(c.paths.evaluation)},
                {"eval_prompts", str(c.paths.eval_prompts)}, {"eval_dataset", str(c.paths.eval_dataset)},
                {"report", str(c.paths.report)},             {"journal", str(c.paths.journal)},
                {"lexicon", str(c.paths.lexicon)}};
  j["sweep"] = {{"grid", c.sweep.grid},
                {"samples_per_pair", c.sweep.samples_per_pair},
                {"workers", c.sweep.workers},
                {"max_retries", c.sweep.max_retries},
                {"provider", c.sweep.provider},
                {"connect_timeout_ms", c.sweep.connect_timeout_ms},
                {"read_timeout_ms", c.sweep.read_timeout_ms}};
  j["synthetic"] = {{"omega_min", c.synthetic.omega_min},
                    {"omega_max", c.synthetic.omega_max},
                    {"noise_std", c.synthetic.noise_std},
                    {"peak_heights", c.synthetic.peak_heights},
                    {"curvatures", c.synthetic.curvatures},
                    {"offsets", c.synthetic.offsets},
                    {"length_floor", c.synthetic.length_floor},
                    {"length_saturation", c.synthetic.length_saturation},
                    {"modifier_saturation", c.synthetic.modifier_saturation},
                    {"length_weight", c.synthetic.length_weight}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"hidden", c.train.hidden},
                {"complexity_dim", c.train.complexity_dim},
                {"lm_order", c.train.lm_order},
                {"lm_smoothing", c.train.lm_smoothing}};
  j["utility"] = {{"alpha", c.utility.alpha}, {"anchor", c.utility.anchor}, {"weights", c.utility.weights}};
  j["embedding"] = {{"hashed_dim", c.embedding.hashed_dim}, {"fallback", c.embedding.fallback}};
  j["evaluate"] = {{"truth", c.evaluate.truth}, {"subset", c.evaluate.subset}};
  j["prompts"] = {{"count", c.prompts.count}, {"first_index", c.prompts.first_index}};
  j["out"] = c.out ? c.out->string() : std::string();
  return j;
}

}  // namespace gsadvisor::cli
