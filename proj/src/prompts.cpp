#include "gsadvisor/prompts.hpp"

#include <fstream>
#include <set>

#include "gsadvisor/error.hpp"
#include "json.hpp"

namespace gsadvisor {

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open prompt file " + path.string());
  std::vector<PromptRecord> prompts;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kFormatError, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("text") ||
        !obj["text"].is_string()) {
      throw Error(ErrorCode::kFormatError, where + ": prompt rows need string id and text");
    }
    PromptRecord p{obj["id"].get<std::string>(), obj["text"].get<std::string>()};
    if (!seen.insert(p.id).second) throw Error(ErrorCode::kDuplicateId, where + ": duplicate prompt id " + p.id);
    prompts.push_back(std::move(p));
  }
  return prompts;
}

void write_prompts(const std::vector<PromptRecord>& prompts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write prompt file " + path.string());
  for (const auto& p : prompts) out << nlohmann::json{{"id", p.id}, {"text", p.text}}.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

}  // namespace gsadvisor
