#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace sbp::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes one code point starting at `pos`. On malformed input returns
/// kReplacement and advances by one byte (the maximal-subpart rule is not
/// needed since replacement runs are stripped anyway).
char32_t decode(std::string_view s, std::size_t& pos);

void append(std::string& out, char32_t cp);

/// Replaces every malformed sequence with U+FFFD.
std::string repair(std::string_view raw);

bool is_whitespace(char32_t cp);

std::size_t count_code_points(std::string_view s);

}  // namespace sbp::utf8
