#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gsadvisor {

struct PromptRecord {
  std::string id;
  std::string text;
};

// JSONL of {"id","text"}; ids must be unique.
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);
void write_prompts(const std::vector<PromptRecord>& prompts, const std::filesystem::path& path);

}  // namespace gsadvisor
