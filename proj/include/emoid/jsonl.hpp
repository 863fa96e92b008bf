#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace emoid::jsonl {

using Json = nlohmann::json;

/// Calls `fn(line_number, line)` for each non-blank line. Throws if the file
/// cannot be opened.
void for_each_line(const std::string& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<Json> read_all(const std::string& path);

/// Writes one compact JSON object per line; creates parent directories.
void write_all(const std::string& path, const std::vector<Json>& rows);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& value);

void write_text(const std::string& path, std::string_view content);
std::string read_text(const std::string& path);

}  // namespace emoid::jsonl
