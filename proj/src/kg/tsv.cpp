#include "trea/kg/tsv.hpp"

#include "trea/error.hpp"

#include <charconv>
#include <fstream>

namespace trea::kg {

void for_each_tsv_row(const std::filesystem::path& path, const std::function<void(const TsvRow&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string text;
  TsvRow row;
  while (std::getline(in, text)) {
    ++row.line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos || text.front() == '#') continue;
    row.fields = split(text, '\t');
    fn(row);
  }
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    out.emplace_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::uint32_t parse_index(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  std::uint32_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(path.string(), line, "expected a non-negative integer, got '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace trea::kg
