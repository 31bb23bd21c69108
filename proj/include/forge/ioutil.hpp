#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge {

using Json = nlohmann::json;

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> read_lines(const std::string& path);

// Calls fn(line_number, line) for every nonempty line. Line numbers are
// 1-based.
void for_each_jsonl_line(
    const std::string& path,
    const std::function<void(std::size_t, const std::string&)>& fn);

Json parse_json_file(const std::string& path);

}  // namespace forge
