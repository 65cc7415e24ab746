#include "repro/utf8.hpp"

namespace repro::utf8 {

namespace {

// Decodes one scalar value at `p`, advancing it. Returns U+FFFFFFFF on
// malformed input without advancing past the offending byte.
inline char32_t decode_one(const unsigned char*& p, const unsigned char* end) {
  const unsigned char b0 = *p;
  if (b0 < 0x80) {
    ++p;
    return b0;
  }
  if (b0 < 0xC2) return 0xFFFFFFFF;  // continuation byte or overlong lead
  if (b0 < 0xE0) {
    if (end - p < 2 || (p[1] & 0xC0) != 0x80) return 0xFFFFFFFF;
    char32_t cp = ((b0 & 0x1Fu) << 6) | (p[1] & 0x3Fu);
    p += 2;
    return cp;
  }
  if (b0 < 0xF0) {
    if (end - p < 3 || (p[1] & 0xC0) != 0x80 || (p[2] & 0xC0) != 0x80)
      return 0xFFFFFFFF;
    char32_t cp = ((b0 & 0x0Fu) << 12) | ((p[1] & 0x3Fu) << 6) | (p[2] & 0x3Fu);
    if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return 0xFFFFFFFF;
    p += 3;
    return cp;
  }
  if (b0 < 0xF5) {
    if (end - p < 4 || (p[1] & 0xC0) != 0x80 || (p[2] & 0xC0) != 0x80 ||
        (p[3] & 0xC0) != 0x80)
      return 0xFFFFFFFF;
    char32_t cp = ((b0 & 0x07u) << 18) | ((p[1] & 0x3Fu) << 12) |
                  ((p[2] & 0x3Fu) << 6) | (p[3] & 0x3Fu);
    if (cp < 0x10000 || cp > 0x10FFFF) return 0xFFFFFFFF;
    p += 4;
    return cp;
  }
  return 0xFFFFFFFF;
}

}  // namespace

bool is_valid(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto* end = p + bytes.size();
  while (p < end) {
    if (decode_one(p, end) == 0xFFFFFFFF) return false;
  }
  return true;
}

std::size_t char_count(std::string_view bytes) {
  std::size_t n = 0;
  for (unsigned char b : bytes) {
    if ((b & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::vector<uint32_t> char_offsets(std::string_view bytes) {
  std::vector<uint32_t> offsets;
  offsets.reserve(bytes.size() + 1);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if ((static_cast<unsigned char>(bytes[i]) & 0xC0) != 0x80)
      offsets.push_back(static_cast<uint32_t>(i));
  }
  offsets.push_back(static_cast<uint32_t>(bytes.size()));
  return offsets;
}

std::u32string decode(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto* end = p + bytes.size();
  while (p < end) {
    char32_t cp = decode_one(p, end);
    if (cp == 0xFFFFFFFF) {
      out.push_back(0xFFFD);
      ++p;
    } else {
      out.push_back(cp);
    }
  }
  return out;
}

std::string encode(std::u32string_view chars) {
  std::string out;
  out.reserve(chars.size());
  for (char32_t cp : chars) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::size_t encoded_size(char32_t cp) {
  if (cp < 0x80) return 1;
  if (cp < 0x800) return 2;
  if (cp < 0x10000) return 3;
  return 4;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
    case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
    case 0x200A: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
    case 0x3000:
      return true;
    default:
      return false;
  }
}

std::size_t skip_leading_whitespace(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto* end = p + bytes.size();
  const auto* cur = p;
  while (cur < end) {
    const auto* next = cur;
    char32_t cp = decode_one(next, end);
    if (cp == 0xFFFFFFFF || !is_whitespace(cp)) break;
    cur = next;
  }
  return static_cast<std::size_t>(cur - p);
}

}  // namespace repro::utf8
