#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gsadvisor/cli/commands.hpp"
#include "gsadvisor/error.hpp"

namespace cli = gsadvisor::cli;

int main(int argc, char** argv) {
  CLI::App app{"gsadvisor: per-prompt guidance scale selection"};
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides overrides;
  std::string grid_text;

  for (std::string_view name : cli::kCommandNames) {
    auto* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", overrides.seed, "seed for prompts, sweep and training");
    sub->add_option("--grid", grid_text, "comma-separated scale grid");
    sub->add_option("--alpha", overrides.alpha, "anchor penalty weight");
    sub->add_option("--anchor", overrides.anchor, "anchor scale");
    sub->add_option("--provider", overrides.provider, "synthetic or http://host:port");
    sub->add_option("--out", overrides.out, "primary output path");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  cli::RunConfig config;
  try {
    config = cli::load_config(config_path);
    if (!grid_text.empty()) overrides.grid = cli::parse_grid(grid_text);
    cli::apply_overrides(config, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFatal;
  }
  return cli::run_command(command, config, {std::cout, std::cerr});
}
