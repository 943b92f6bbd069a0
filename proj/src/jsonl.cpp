#include "encassist/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "encassist/error.hpp"

namespace encassist {

void for_each_jsonl(std::istream& in,
                    const std::function<void(const json&, std::size_t)>& visit) {
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError("line " + std::to_string(line_number) + ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) {
      throw SchemaError("line " + std::to_string(line_number) + ": expected an object");
    }
    visit(record, line_number);
  }
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& visit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  for_each_jsonl(in, visit);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace encassist
