#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace passviz {

/// Decodes strict UTF-8 (no overlongs, no surrogates, max U+10FFFF).
/// Returns nullopt on any malformed sequence.
std::optional<std::u32string> decode_utf8(std::string_view bytes);

std::string encode_utf8(std::u32string_view text);

/// Code point count of a UTF-8 string that is already known to be valid.
std::size_t utf8_length(std::string_view valid_utf8);

}  // namespace passviz
