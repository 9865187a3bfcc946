#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gdr::io {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename(2), so readers never observe a
/// partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls `fn(line_json, line_number)` for every non-blank line. Parse errors
/// are rethrown as IngestError carrying path and line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

std::string to_jsonl(const std::vector<json>& rows);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace gdr::io
