#pragma once

#include <filesystem>
#include <string>

#include "encassist/jsonl.hpp"

namespace encassist::testing {

inline std::filesystem::path fixture_path(const std::string& relative) {
  return std::filesystem::path(ENCASSIST_FIXTURE_DIR) / relative;
}

inline std::string read_fixture(const std::string& relative) {
  return read_file(fixture_path(relative));
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace encassist::testing
