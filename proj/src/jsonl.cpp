#include "emoid/jsonl.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "emoid/common.hpp"

namespace emoid::jsonl {
namespace fs = std::filesystem;

namespace {

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

}  // namespace

void for_each_line(const std::string& path,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(n, line);
  }
}

std::vector<Json> read_all(const std::string& path) {
  std::vector<Json> rows;
  for_each_line(path, [&](std::size_t n, std::string_view line) {
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw Error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return rows;
}

void write_all(const std::string& path, const std::vector<Json>& rows) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : rows) out << r.dump() << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

void write_text(const std::string& path, std::string_view content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace emoid::jsonl
