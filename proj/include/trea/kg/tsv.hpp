#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace trea::kg {

struct TsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Calls `fn` for every non-blank, non-comment ('#') line of a TSV file.
/// A trailing '\r' is stripped. Throws ValidationError if the file is missing.
void for_each_tsv_row(const std::filesystem::path& path, const std::function<void(const TsvRow&)>& fn);

std::vector<std::string> split(std::string_view text, char sep);

/// Parses a non-negative decimal id; ParseError (with line) otherwise.
std::uint32_t parse_index(std::string_view field, const std::filesystem::path& path, std::size_t line);

}  // namespace trea::kg
