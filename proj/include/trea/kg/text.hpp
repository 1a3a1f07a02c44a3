#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace trea::kg {

/// Lowercases ASCII letters, turns every character outside [a-z0-9_'] (and
/// outside multi-byte UTF-8 sequences) into a separator, and collapses runs
/// of separators into one space. Leading/trailing space is dropped.
std::string normalize(std::string_view text);

/// Whitespace split of normalize(text).
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace trea::kg
