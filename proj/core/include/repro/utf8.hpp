#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace repro::utf8 {

// Returns true iff `bytes` is well-formed UTF-8 (no surrogates, no overlong
// forms, max U+10FFFF).
bool is_valid(std::string_view bytes);

// Number of Unicode scalar values in well-formed UTF-8.
std::size_t char_count(std::string_view bytes);

// Byte offsets of every character boundary, plus a final entry equal to
// bytes.size(). For "ab" this is {0, 1, 2}. Input must be well-formed.
std::vector<uint32_t> char_offsets(std::string_view bytes);

// Decodes well-formed UTF-8 into scalar values.
std::u32string decode(std::string_view bytes);

// Encodes scalar values back to UTF-8.
std::string encode(std::u32string_view chars);

// Number of bytes in the encoding of one scalar value.
std::size_t encoded_size(char32_t cp);

// Unicode White_Space property (the fixed 25-codepoint list).
bool is_whitespace(char32_t cp);

// Byte offset after any leading whitespace characters.
std::size_t skip_leading_whitespace(std::string_view bytes);

}  // namespace repro::utf8
