#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace morphtest::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_utf8_continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

inline bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string to_upper_ascii(std::string_view s);
std::string strip_whitespace(std::string_view s);

/// Trim, then drop one matching pair of surrounding quotes (", ', or the
/// typographic double quotes), then trim again.
std::string strip_quotes(std::string_view s);

/// Splits on sentence-final punctuation (.!?) followed by whitespace.
/// Each returned sentence keeps its punctuation and has no surrounding
/// whitespace.
std::vector<std::string> split_sentences(std::string_view s);

bool is_valid_utf8(std::string_view s);

}  // namespace morphtest::text
