#pragma once

#include <filesystem>
#include <ostream>
#include <string_view>
#include <vector>

#include "gsadvisor/cli/config.hpp"

namespace gsadvisor::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
};

// Each command reads its inputs from the config, writes its primary output
// (config path, or --out) plus "<output>.manifest.json", and returns an exit
// code. Library errors propagate; run_command turns them into exit code 1.
int cmd_prompts(const RunConfig& config, CommandIo io);
int cmd_sweep(const RunConfig& config, CommandIo io);
int cmd_train(const RunConfig& config, CommandIo io);
int cmd_select(const RunConfig& config, CommandIo io);
int cmd_evaluate(const RunConfig& config, CommandIo io);
int cmd_report(const RunConfig& config, CommandIo io);

inline constexpr std::string_view kCommandNames[] = {"prompts", "sweep", "train", "select", "evaluate", "report"};

int run_command(std::string_view name, const RunConfig& config, CommandIo io);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// Writes "<output>.manifest.json": command, resolved config, and content
// digests of the inputs and the output. Contains no timestamps.
void write_manifest(const std::filesystem::path& output, std::string_view command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs);

}  // namespace gsadvisor::cli
