#include "gsadvisor/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gsadvisor/error.hpp"
#include "gsadvisor/evaluation.hpp"
#include "gsadvisor/featurizer.hpp"
#include "gsadvisor/hashing.hpp"
#include "gsadvisor/provider.hpp"
#include "gsadvisor/sweep.hpp"
#include "gsadvisor/synthetic_oracle.hpp"

namespace gsadvisor::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const fs::path& require(const fs::path& p, std::string_view key) {
  if (p.empty()) throw Error(ErrorCode::kInvalidArgument, "config key " + std::string(key) + " is not set");
  return p;
}

fs::path output_for(const RunConfig& config, const fs::path& configured, std::string_view key) {
  if (config.out) return *config.out;
  return require(configured, key);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

EmbeddingProvider embeddings_from(const RunConfig& config, std::size_t hashed_dim) {
  if (!config.paths.embeddings.empty()) {
    return EmbeddingProvider(load_embeddings(config.paths.embeddings), config.embedding.fallback);
  }
  return EmbeddingProvider(hashed_dim);
}

std::vector<fs::path> with_optional(std::vector<fs::path> inputs, const fs::path& maybe) {
  if (!maybe.empty()) inputs.push_back(maybe);
  return inputs;
}

std::unique_ptr<QualityProvider> make_provider(const RunConfig& config, const PromptFeaturizer& featurizer) {
  if (config.sweep.provider == "synthetic") {
    return std::make_unique<SyntheticProvider>(config.synthetic_params(), featurizer);
  }
  HttpClientOptions options;
  options.connect_timeout = std::chrono::milliseconds(config.sweep.connect_timeout_ms);
  options.read_timeout = std::chrono::milliseconds(config.sweep.read_timeout_ms);
  return std::make_unique<HttpProvider>(config.sweep.provider, options);
}

void check_schema(const MetricSchema& found, const MetricSchema& expected, std::string_view what) {
  if (!(found == expected)) {
    throw Error(ErrorCode::kSchemaMismatch,
                std::string(what) + " has metric schema {" + found.to_spec() + "}, config expects {" +
                    expected.to_spec() + "}");
  }
}

struct LoadedModel {
  PredictorModel model;
  PromptFeaturizer featurizer;
};

LoadedModel load_trained(const RunConfig& config) {
  PredictorModel model = load_model(require(config.paths.model, "paths.model"));
  auto lexicon = ModifierLexicon::load(config.paths.lexicon);
  auto featurizer = PromptFeaturizer::for_model(model, std::move(lexicon), embeddings_from(config, model.embedding.dim));
  return {std::move(model), std::move(featurizer)};
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return hex64(fnv1a(buffer.str()));
}

void write_manifest(const fs::path& output, std::string_view command, const RunConfig& config,
                    const std::vector<fs::path>& inputs) {
  json in = json::object();
  for (const auto& p : inputs) {
    if (fs::is_regular_file(p)) in[p.string()] = file_digest(p);
  }
  json doc = {{"schema", "manifest.v1"},
              {"command", command},
              {"config", to_json(config)},
              {"inputs", in},
              {"output", {{"path", output.string()}, {"digest", file_digest(output)}}}};
  write_text(output.string() + ".manifest.json", doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_prompts(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.prompts, "paths.prompts");
  const auto lexicon = ModifierLexicon::load(config.paths.lexicon);
  const auto pool = synthetic_prompt_pool(config.prompts.count, config.seed, lexicon, config.prompts.first_index);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_prompts(pool, out);
  write_manifest(out, "prompts", config, {config.paths.lexicon});
  io.out << "wrote " << pool.size() << " prompts to " << out.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.dataset, "paths.dataset");
  const auto prompts = read_prompts(require(config.paths.prompts, "paths.prompts"));
  const auto schema = config.metric_schema();
  auto featurizer = PromptFeaturizer::fit(prompts, ModifierLexicon::load(config.paths.lexicon),
                                          EmbeddingProvider(config.embedding.hashed_dim), config.train.lm_order,
                                          config.train.lm_smoothing);
  auto provider = make_provider(config, featurizer);

  SweepPlan plan{prompts, config.grid(), config.sweep.samples_per_pair, config.seed, schema};
  SweepOptions options;
  options.workers = config.sweep.workers;
  options.max_retries = config.sweep.max_retries;
  if (!config.paths.journal.empty()) options.journal_dir = config.paths.journal;
  options.log = [&io](const std::string& line) { io.err << line << "\n"; };

  const SweepOutput result = run_sweep(plan, *provider, options);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_dataset(result.records, schema, plan.samples_per_pair, out);

  const auto& r = result.report;
  json failures = json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"id", f.prompt_id}, {"scale", f.scale}, {"attempts", f.attempts}, {"reason", f.reason}});
  }
  const json report = {{"total_pairs", r.total_pairs}, {"total_work", r.total_work}, {"rows", result.records.size()},
                       {"scored", r.completed},       {"resumed", r.resumed},       {"failures", failures},
                       {"interrupted", r.interrupted}};
  write_text(out.string() + ".report.json", report.dump(2) + "\n");
  write_manifest(out, "sweep", config, with_optional({config.paths.prompts, config.paths.lexicon}, config.paths.embeddings));

  io.out << "dataset " << out.string() << ": " << result.records.size() << " of " << r.total_pairs << " pairs ("
         << r.resumed << " resumed), N_g=" << plan.samples_per_pair << "\n";
  char timing[96];
  std::snprintf(timing, sizeof(timing), "elapsed %.2fs, %.3gs per pair\n", r.elapsed_seconds, r.mean_pair_seconds);
  io.out << timing;
  for (const auto& f : r.failures) {
    io.out << "failed " << f.prompt_id << " @ " << format_scale(f.scale) << " after " << f.attempts
           << " attempts: " << f.reason << "\n";
  }
  return r.failures.empty() && !r.interrupted ? kExitOk : kExitPartial;
}

int cmd_train(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.model, "paths.model");
  const auto dataset = read_dataset(require(config.paths.dataset, "paths.dataset"));
  check_schema(dataset.schema, config.metric_schema(), "dataset");
  const auto all_prompts = read_prompts(require(config.paths.prompts, "paths.prompts"));

  std::set<std::string> used;
  for (const auto& r : dataset.records) used.insert(r.prompt_id);
  std::vector<PromptRecord> prompts;
  for (const auto& p : all_prompts) {
    if (used.count(p.id) != 0) prompts.push_back(p);
  }
  if (prompts.empty()) throw Error(ErrorCode::kEmptyCorpus, "dataset has no rows for the configured prompts");

  auto featurizer = PromptFeaturizer::fit(prompts, ModifierLexicon::load(config.paths.lexicon),
                                          embeddings_from(config, config.embedding.hashed_dim), config.train.lm_order,
                                          config.train.lm_smoothing);
  const TrainingSet set = make_training_set(dataset, prompts, featurizer);
  TrainResult result = train(set, dataset.schema, config.train_config());
  featurizer.attach_to(result.model);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_model(result.model, out);
  write_manifest(out, "train", config,
                 with_optional({config.paths.dataset, config.paths.prompts, config.paths.lexicon},
                               config.paths.embeddings));

  const auto& r = result.report;
  io.out << "param_count " << r.param_count << " (budget " << kParamBudget << ")\n";
  char line[128];
  std::snprintf(line, sizeof(line), "examples %zu, epochs %zu, mse %.6g -> %.6g\n", set.size(),
                r.epoch_loss.size(), r.initial_loss, r.final_loss);
  io.out << line;
  io.out << "model " << out.string() << "\n";
  return kExitOk;
}

int cmd_select(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.selection, "paths.selection");
  const fs::path prompts_path = config.paths.select_prompts.empty() ? config.paths.prompts : config.paths.select_prompts;
  const auto prompts = read_prompts(require(prompts_path, "paths.select_prompts"));
  auto [model, featurizer] = load_trained(config);
  const ScaleGrid grid = config.grid();
  UtilityConfig utility = config.utility_config();
  check_schema(model.metric_schema, config.metric_schema(), "model");

  std::string text;
  for (const auto& p : prompts) {
    const PromptInput input = featurizer.featurize(p);
    const SelectionResult result = select_from_predictions(grid, predict_grid(model, input, grid), utility);
    text += selection_report_line(p.id, result) + "\n";
  }
  write_text(out, text);
  write_manifest(out, "select", config,
                 with_optional({prompts_path, config.paths.model, config.paths.lexicon}, config.paths.embeddings));
  io.out << "selected scales for " << prompts.size() << " prompts -> " << out.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.evaluation, "paths.evaluation");
  const auto prompts = read_prompts(require(config.paths.eval_prompts, "paths.eval_prompts"));
  auto [model, featurizer] = load_trained(config);
  const MetricSchema schema = config.metric_schema();
  check_schema(model.metric_schema, schema, "model");
  const ScaleGrid grid = config.grid();
  const UtilityConfig utility = config.utility_config();

  QualityTable predicted;
  QualityTable truth;
  std::vector<std::string> ids;
  std::vector<fs::path> inputs = {config.paths.eval_prompts, config.paths.model, config.paths.lexicon};

  if (config.evaluate.truth == "synthetic") {
    const auto params = config.synthetic_params();
    for (const auto& p : prompts) {
      const PromptInput input = featurizer.featurize(p);
      std::vector<QualityVector> row;
      for (double s : grid.scales()) row.push_back(true_quality(params, input.complexity, s));
      truth.push_back(std::move(row));
      predicted.push_back(predict_grid(model, input, grid));
      ids.push_back(p.id);
    }
  } else if (config.evaluate.truth == "dataset") {
    const auto labeled = read_dataset(require(config.paths.eval_dataset, "paths.eval_dataset"));
    check_schema(labeled.schema, schema, "evaluation dataset");
    inputs.push_back(config.paths.eval_dataset);
    std::map<std::pair<std::string, std::string>, const SweepRecord*> cells;
    for (const auto& r : labeled.records) cells[{r.prompt_id, format_scale(r.scale)}] = &r;
    for (const auto& p : prompts) {
      std::vector<QualityVector> row;
      for (double s : grid.scales()) {
        auto it = cells.find({p.id, format_scale(s)});
        if (it == cells.end()) {
          throw Error(ErrorCode::kFormatError,
                      "evaluation dataset lacks (" + p.id + ", " + format_scale(s) + "); every grid point is needed");
        }
        row.push_back(it->second->aggregate);
      }
      truth.push_back(std::move(row));
      predicted.push_back(predict_grid(model, featurizer.featurize(p), grid));
      ids.push_back(p.id);
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument, "evaluate.truth must be synthetic or dataset");
  }

  EvaluationSummary summary = evaluate_policies(ids, grid, predicted, truth, utility);
  if (!config.evaluate.subset.empty()) {
    UtilityConfig restricted = utility;
    restricted.weights = subset_weights(schema, config.evaluate.subset);
    summary.ablation = AblationOutcome{config.evaluate.subset,
                                       selection_regret(grid, predicted, truth, restricted, utility.weights),
                                       summary.policy("adaptive").mean_regret};
  }
  const Eigen::VectorXd r2 = per_metric_r2(predicted, truth);

  json policies = json::array();
  for (const auto& p : summary.policies) {
    policies.push_back({{"name", p.name},
                        {"scale", p.fixed_scale ? json(*p.fixed_scale) : json(nullptr)},
                        {"mean_utility", p.mean_utility},
                        {"mean_regret", p.mean_regret}});
  }
  json per_prompt = json::array();
  const auto& adaptive = summary.policy("adaptive");
  const auto& oracle = summary.policy("oracle");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    json row = {{"id", ids[i]},
                {"oracle_scale", oracle.chosen[i]},
                {"adaptive_scale", adaptive.chosen[i]},
                {"adaptive_regret", adaptive.regret[i]}};
    for (const auto& p : summary.policies) {
      if (p.name == "fixed_anchor") row["fixed_anchor_regret"] = p.regret[i];
    }
    per_prompt.push_back(std::move(row));
  }
  json r2_json = json::object();
  for (std::size_t m = 0; m < schema.size(); ++m) r2_json[schema.names()[m]] = r2[static_cast<Eigen::Index>(m)];
  json doc = {{"schema", "evaluation.v1"},
              {"truth", config.evaluate.truth},
              {"weights", vector_json(utility.weights)},
              {"alpha", utility.alpha},
              {"anchor", utility.anchor},
              {"policies", policies},
              {"win_rate", summary.win_rate},
              {"tie_rate", summary.tie_rate},
              {"r2", r2_json},
              {"per_prompt", per_prompt}};
  if (summary.ablation) {
    doc["ablation"] = {{"subset", summary.ablation->subset},
                       {"subset_regret", summary.ablation->subset_regret},
                       {"full_regret", summary.ablation->full_regret}};
  }
  write_text(out, doc.dump(2) + "\n");
  write_manifest(out, "evaluate", config, with_optional(inputs, config.paths.embeddings));
  io.out << format_summary_table(summary);
  return kExitOk;
}

int cmd_report(const RunConfig& config, CommandIo io) {
  const fs::path out = output_for(config, config.paths.report, "paths.report");
  const auto dataset = read_dataset(require(config.paths.dataset, "paths.dataset"));
  const UtilityConfig utility = [&] {
    UtilityConfig u = UtilityConfig::uniform(dataset.schema.size(), config.utility.alpha, config.utility.anchor);
    if (!config.utility.weights.empty()) u = config.utility_config();
    return u;
  }();

  std::map<double, std::pair<Eigen::VectorXd, std::size_t>> by_scale;
  std::set<std::string> prompt_ids;
  for (const auto& r : dataset.records) {
    prompt_ids.insert(r.prompt_id);
    auto [it, inserted] = by_scale.try_emplace(r.scale, Eigen::VectorXd::Zero(r.aggregate.size()), 0);
    it->second.first += r.aggregate;
    ++it->second.second;
  }

  json per_scale = json::array();
  std::string table = "scale   pairs";
  for (const auto& name : dataset.schema.names()) {
    char cell[32];
    std::snprintf(cell, sizeof(cell), " %12s", name.c_str());
    table += cell;
  }
  table += "   mean w^T q\n";
  std::optional<std::pair<double, double>> best;  // (scale, mean utility)
  for (const auto& [scale, acc] : by_scale) {
    const Eigen::VectorXd mean = acc.first / static_cast<double>(acc.second);
    const double u = utility.weights.dot(mean);
    if (!best || u > best->second) best = {scale, u};
    per_scale.push_back({{"scale", scale}, {"pairs", acc.second}, {"mean_oriented", vector_json(mean)}, {"mean_utility", u}});
    char line[64];
    std::snprintf(line, sizeof(line), "%5s %7zu", format_scale(scale).c_str(), acc.second);
    table += line;
    for (Eigen::Index m = 0; m < mean.size(); ++m) {
      std::snprintf(line, sizeof(line), " %12.5f", mean[m]);
      table += line;
    }
    std::snprintf(line, sizeof(line), " %12.5f\n", u);
    table += line;
  }

  std::vector<std::string> directions;
  for (auto d : dataset.schema.directions()) directions.emplace_back(to_string(d));
  json doc = {{"schema", "report.v1"},
              {"dataset", config.paths.dataset.string()},
              {"rows", dataset.records.size()},
              {"prompts", prompt_ids.size()},
              {"n_g", dataset.n_g},
              {"metric_schema", {{"names", dataset.schema.names()}, {"directions", directions}}},
              {"per_scale", per_scale},
              {"best_fixed_scale", best ? json(best->first) : json(nullptr)}};
  write_text(out, doc.dump(2) + "\n");
  write_manifest(out, "report", config, {config.paths.dataset});

  io.out << dataset.records.size() << " rows, " << prompt_ids.size() << " prompts, N_g=" << dataset.n_g
         << " (aggregates oriented: higher is better)\n"
         << table;
  if (best) io.out << "best fixed scale by mean utility: " << format_scale(best->first) << "\n";
  return kExitOk;
}

int run_command(std::string_view name, const RunConfig& config, CommandIo io) {
  try {
    if (name == "prompts") return cmd_prompts(config, io);
    if (name == "sweep") return cmd_sweep(config, io);
    if (name == "train") return cmd_train(config, io);
    if (name == "select") return cmd_select(config, io);
    if (name == "evaluate") return cmd_evaluate(config, io);
    if (name == "report") return cmd_report(config, io);
    io.err << "error: unknown command " << name << "\n";
    return kExitFatal;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}

}  // namespace gsadvisor::cli
