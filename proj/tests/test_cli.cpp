#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fake_service.hpp"
#include "gsadvisor/cli/commands.hpp"
#include "gsadvisor/cli/config.hpp"
#include "gsadvisor/prompts.hpp"
#include "gsadvisor/sweep.hpp"
#include "test_support.hpp"

using namespace gsadvisor;
using namespace gsadvisor::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::string_view command, const RunConfig& config) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_command(command, config, {out, err});
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Small synthetic pipeline config rooted in `dir`.
std::string base_config(std::size_t prompt_count) {
  return "seed = 5\n"
         "[paths]\n"
         "prompts = \"prompts.jsonl\"\n"
         "dataset = \"sweep.jsonl\"\n"
         "model = \"model.json\"\n"
         "selection = \"selection.jsonl\"\n"
         "evaluation = \"evaluation.json\"\n"
         "report = \"report.json\"\n"
         "[prompts]\n"
         "count = " + std::to_string(prompt_count) + "\n"
         "[sweep]\n"
         "samples_per_pair = 4\n"
         "[embedding]\n"
         "hashed_dim = 128\n"
         "[train]\n"
         "epochs = 30\n"
         "hidden = [64, 32]\n";
}

RunConfig config_in(const testing::TempDir& dir, const std::string& text) {
  testing::write_file(dir / "run.toml", text);
  return load_config(dir / "run.toml");
}

// One trained pipeline shared by the select/evaluate cases.
struct Pipeline {
  testing::TempDir dir;
  RunConfig config;
  Run train;

  Pipeline() {
    config = config_in(dir, base_config(300) + "epochs = 40\n");
    REQUIRE(run("prompts", config).code == kExitOk);
    REQUIRE(run("sweep", config).code == kExitOk);
    train = run("train", config);
    REQUIRE(train.code == kExitOk);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config parsing") {
    testing::TempDir dir;
    const auto c = config_in(dir,
                             "# run settings\n"
                             "seed = 42\n"
                             "metrics = \"clip:higher,fid:lower\"   # two metrics\n"
                             "[paths]\n"
                             "prompts = \"in/p#1.jsonl\"\n"
                             "model = /abs/model.json\n"
                             "[sweep]\n"
                             "grid = \"1, 2.5, 4\"\n"
                             "provider = http://localhost:9000\n"
                             "[utility]\n"
                             "alpha = 0.1\n"
                             "weights = [0.7, 0.3]\n"
                             "[evaluate]\n"
                             "subset = \"clip\"\n");
    CHECK(c.seed == 42);
    CHECK(c.metric_schema().size() == 2);
    CHECK(c.paths.prompts == dir / "in/p#1.jsonl");
    CHECK(c.paths.model == fs::path("/abs/model.json"));
    CHECK(c.sweep.grid == std::vector<double>{1.0, 2.5, 4.0});
    CHECK(c.sweep.provider == "http://localhost:9000");
    CHECK(c.utility_config().weights[0] == 0.7);
    CHECK(c.utility.alpha == 0.1);
    CHECK(c.evaluate.subset == std::vector<std::string>{"clip"});
    CHECK_FALSE(c.paths.lexicon.empty());

    CHECK(testing::error_code([] { parse_config("[sweep]\nbogus = 1\n", {}); }) == ErrorCode::kInvalidArgument);
    CHECK(testing::error_code([] { parse_config("seed = \"x\"\n", {}); }) == ErrorCode::kInvalidArgument);
    CHECK(testing::error_code([] { parse_config("[sweep\n", {}); }) == ErrorCode::kInvalidArgument);
    CHECK(testing::error_code([] { parse_config("seed\n", {}); }) == ErrorCode::kInvalidArgument);
    CHECK(testing::error_code([] { parse_grid("1,,2"); }) == ErrorCode::kInvalidArgument);
    CHECK(testing::error_code([] { load_config("/nonexistent/run.toml"); }) == ErrorCode::kIoError);
  }

  TEST_CASE("flags override the config file") {
    RunConfig c = parse_config("seed = 1\n[utility]\nalpha = 0.2\nanchor = 4\n", {});
    Overrides o;
    o.seed = 9;
    o.grid = parse_grid("2,3");
    o.alpha = 0.0;
    o.out = "x.json";
    apply_overrides(c, o);
    CHECK(c.seed == 9);
    CHECK(c.grid().scales() == std::vector<double>{2.0, 3.0});
    CHECK(c.utility.alpha == 0.0);
    CHECK(c.utility.anchor == 4.0);
    CHECK(c.out == fs::path("x.json"));
    CHECK(to_json(c)["seed"] == 9);
  }

  TEST_CASE("synthetic sweep writes a full dataset, report and manifest") {
    testing::TempDir dir;
    const auto config = config_in(dir, base_config(6));
    CHECK(run("prompts", config).code == kExitOk);
    const auto r = run("sweep", config);
    CHECK(r.code == kExitOk);
    const auto ds = read_dataset(dir / "sweep.jsonl");
    CHECK(ds.records.size() == 6 * 12);
    CHECK(ds.n_g == 4);
    const auto report = nlohmann::json::parse(testing::read_file(dir / "sweep.jsonl.report.json"));
    CHECK(report["rows"] == 72);
    CHECK(report["failures"].empty());
    const auto manifest = nlohmann::json::parse(testing::read_file(dir / "sweep.jsonl.manifest.json"));
    CHECK(manifest["command"] == "sweep");
    CHECK(manifest["output"]["digest"] == file_digest(dir / "sweep.jsonl"));
    CHECK(manifest["inputs"].contains((dir / "prompts.jsonl").string()));
    // No timestamps: a rerun reproduces the manifest byte for byte.
    const auto first_manifest = testing::read_file(dir / "sweep.jsonl.manifest.json");
    REQUIRE(run("sweep", config).code == kExitOk);
    CHECK(testing::read_file(dir / "sweep.jsonl.manifest.json") == first_manifest);

    const auto rep = run("report", config);
    CHECK(rep.code == kExitOk);
    const auto doc = nlohmann::json::parse(testing::read_file(dir / "report.json"));
    CHECK(doc["schema"] == "report.v1");
    CHECK(doc["per_scale"].size() == 12);
    CHECK(fs::exists(dir / "report.json.manifest.json"));
  }

  TEST_CASE("unreachable provider is fatal and writes nothing") {
    testing::TempDir dir;
    auto config = config_in(dir, base_config(3) + "[sweep]\nprovider = \"http://127.0.0.1:1\"\nconnect_timeout_ms = 300\n");
    REQUIRE(run("prompts", config).code == kExitOk);
    const auto r = run("sweep", config);
    CHECK(r.code == kExitFatal);
    CHECK(r.err.find("ProviderUnreachable") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "sweep.jsonl"));
  }

  TEST_CASE("scorer failures give a partial dataset and exit 2") {
    testing::TempDir dir;
    testing::FakeService service;
    auto config = config_in(dir, base_config(20) + "[sweep]\ngrid = \"1,2,3,4,5,6,7,8,9,10\"\nsamples_per_pair = 1\n"
                                                   "max_retries = 1\nworkers = 4\nprovider = \"" +
                                                   service.endpoint() + "\"\n");
    REQUIRE(run("prompts", config).code == kExitOk);
    const auto prompts = read_prompts(dir / "prompts.jsonl");
    service.fail_pair(prompts[2].text, 3.0);
    service.fail_pair(prompts[7].text, 10.0);
    service.fail_pair(prompts[19].text, 1.0);
    const auto r = run("sweep", config);
    CHECK(r.code == kExitPartial);
    CHECK(read_dataset(dir / "sweep.jsonl").records.size() == 197);
    const auto report = nlohmann::json::parse(testing::read_file(dir / "sweep.jsonl.report.json"));
    CHECK(report["total_pairs"] == 200);
    REQUIRE(report["failures"].size() == 3);
    CHECK(report["failures"][0]["id"] == prompts[2].id);
    CHECK(report["failures"][0]["attempts"] == 2);
    CHECK(r.out.find("failed " + prompts[7].id + " @ 10") != std::string::npos);
  }

  TEST_CASE("train rejects a dataset with a different schema") {
    testing::TempDir dir;
    auto config = config_in(dir, base_config(4));
    REQUIRE(run("prompts", config).code == kExitOk);
    REQUIRE(run("sweep", config).code == kExitOk);
    config.metrics = "clip:higher,fid:lower";
    const auto r = run("train", config);
    CHECK(r.code == kExitFatal);
    CHECK(r.err.find("SchemaMismatch") != std::string::npos);
  }

  TEST_CASE("training reduces the loss and stays within budget") {
    auto& p = pipeline();
    CHECK(p.train.out.find("param_count") != std::string::npos);
    const auto model = load_model(p.dir / "model.json");
    CHECK(model.param_count() <= kParamBudget);
    double initial = 0.0;
    double final_mse = 0.0;
    const auto at = p.train.out.find("mse ");
    REQUIRE(at != std::string::npos);
    std::istringstream in(p.train.out.substr(at + 4));
    std::string arrow;
    in >> initial >> arrow >> final_mse;
    CHECK(final_mse < 0.1 * initial);
  }

  TEST_CASE("retraining with the same seed gives an identical model file") {
    auto& p = pipeline();
    RunConfig again = p.config;
    again.out = p.dir / "model2.json";
    REQUIRE(run("train", again).code == kExitOk);
    CHECK(file_digest(p.dir / "model.json") == file_digest(p.dir / "model2.json"));
    again.seed = 6;
    again.out = p.dir / "model3.json";
    REQUIRE(run("train", again).code == kExitOk);
    CHECK(file_digest(p.dir / "model.json") != file_digest(p.dir / "model3.json"));
  }

  TEST_CASE("short prompts get less guidance than long detailed ones") {
    auto& p = pipeline();
    write_prompts({{"car", "A white car."},
                   {"fruit",
                    "A delicious fruit plate in a silver bowl. The fruit includes an apple, two apricots, red and "
                    "green grapes, a banana, and a peach."}},
                  p.dir / "figures.jsonl");
    RunConfig c = p.config;
    c.paths.select_prompts = p.dir / "figures.jsonl";
    c.out = p.dir / "figures.selection.jsonl";
    const auto r = run("select", c);
    REQUIRE(r.code == kExitOk);
    std::istringstream lines(testing::read_file(p.dir / "figures.selection.jsonl"));
    std::string line;
    std::getline(lines, line);
    const auto car = nlohmann::json::parse(line);
    std::getline(lines, line);
    const auto fruit = nlohmann::json::parse(line);
    CHECK(car["id"] == "car");
    CHECK(car["chosen_scale"].get<double>() < 5.0);
    CHECK(fruit["chosen_scale"].get<double>() > 5.0);
    CHECK(car["utilities"].size() == 12);
    CHECK(fs::exists(p.dir / "figures.selection.jsonl.manifest.json"));
  }

  TEST_CASE("select edge cases") {
    auto& p = pipeline();
    testing::write_file(p.dir / "none.jsonl", "");
    RunConfig c = p.config;
    c.paths.select_prompts = p.dir / "none.jsonl";
    c.out = p.dir / "none.selection.jsonl";
    const auto empty = run("select", c);
    CHECK(empty.code == kExitOk);
    CHECK(fs::exists(p.dir / "none.selection.jsonl"));
    CHECK(testing::read_file(p.dir / "none.selection.jsonl").empty());

    c.paths.model = p.dir / "missing-model.json";
    const auto missing = run("select", c);
    CHECK(missing.code == kExitFatal);
    CHECK(missing.err.find("missing-model.json") != std::string::npos);
  }

  TEST_CASE("evaluate reports every policy") {
    auto& p = pipeline();
    RunConfig gen = p.config;
    gen.prompts.count = 60;
    gen.prompts.first_index = 1000;
    gen.seed = 77;
    gen.out = p.dir / "heldout.jsonl";
    REQUIRE(run("prompts", gen).code == kExitOk);

    RunConfig c = p.config;
    c.paths.eval_prompts = p.dir / "heldout.jsonl";
    c.evaluate.subset = {"kid", "clip"};
    const auto r = run("evaluate", c);
    REQUIRE(r.code == kExitOk);
    const auto doc = nlohmann::json::parse(testing::read_file(p.dir / "evaluation.json"));
    CHECK(doc["schema"] == "evaluation.v1");
    std::map<std::string, double> regret;
    for (const auto& row : doc["policies"]) regret[row["name"]] = row["mean_regret"];
    CHECK(regret.count("no_guidance"));
    CHECK(regret.count("fixed_anchor"));
    CHECK(regret.count("best_fixed"));
    CHECK(regret.at("oracle") == 0.0);
    for (const auto& [name, value] : regret) CHECK(value >= 0.0);
    CHECK(doc["per_prompt"].size() == 60);
    CHECK(doc.contains("ablation"));
    CHECK(r.out.find("adaptive") != std::string::npos);
  }

  TEST_CASE("unknown command") {
    const auto r = run("bogus", RunConfig{});
    CHECK(r.code == kExitFatal);
  }
}
