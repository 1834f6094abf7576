#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace heston {

/// Shortest round-trip decimal form of a double ('.' decimal separator,
/// locale-independent); the same routine feeds every CSV writer so repeated
/// runs emit byte-identical files.
std::string format_number(double v);

/// One CSV line from pre-formatted cells.
std::string csv_line(const std::vector<std::string>& cells);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Serializes with sorted object keys and 2-space indent (nlohmann defaults),
/// newline-terminated.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace heston
