#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "gsadvisor/error.hpp"
#include "gsadvisor/text_features.hpp"

#ifndef GSADVISOR_TEST_DATA_DIR
#error "GSADVISOR_TEST_DATA_DIR must point at the repository data directory"
#endif

namespace testing {

inline std::filesystem::path data_dir() { return GSADVISOR_TEST_DATA_DIR; }

inline const gsadvisor::ModifierLexicon& lexicon() {
  static const auto lex = gsadvisor::ModifierLexicon::load(data_dir() / "modifiers.txt");
  return lex;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("gsadvisor_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Code of the gsadvisor::Error thrown by f, or nullopt if nothing was thrown.
template <typename F>
std::optional<gsadvisor::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const gsadvisor::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
