#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

namespace encassist {

using json = nlohmann::json;

/// Calls `visit(record, line_number)` for every non-blank line of a
/// line-delimited JSON stream. Parse failures throw SchemaError carrying the
/// 1-based line number; exceptions from `visit` propagate unchanged.
void for_each_jsonl(std::istream& in, const std::function<void(const json&, std::size_t)>& visit);
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& visit);

/// Writes `content` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace encassist
