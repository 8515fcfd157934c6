#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace medctx::csv {

using Row = std::vector<std::string>;

/// RFC 4180 subset: comma separated, double-quoted fields may contain commas,
/// newlines and doubled quotes.
std::vector<Row> parse(const std::string& text);
std::vector<Row> read_file(const std::filesystem::path& path);

std::string escape(const std::string& field);
std::string format_row(const Row& row);

}  // namespace medctx::csv
