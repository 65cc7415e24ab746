#include "repro/unicode_norm.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "repro/utf8.hpp"

namespace repro::norm {
namespace {

#include "nfc_data.inc"

// Hangul syllables decompose and recompose arithmetically (UAX #15 §3.12)
// instead of through the tables.
constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr char32_t kHangulLCount = 19;
constexpr char32_t kHangulVCount = 21;
constexpr char32_t kHangulTCount = 28;
constexpr char32_t kHangulNCount = kHangulVCount * kHangulTCount;
constexpr char32_t kHangulSCount = kHangulLCount * kHangulNCount;

int combining_class(char32_t cp) {
  auto* it = std::lower_bound(std::begin(kCcc), std::end(kCcc), cp,
                              [](const CccEntry& e, char32_t c) { return e.cp < c; });
  if (it != std::end(kCcc) && it->cp == cp) return it->ccc;
  return 0;
}

const DecompEntry* find_decomposition(char32_t cp) {
  auto* it = std::lower_bound(std::begin(kDecomp), std::end(kDecomp), cp,
                              [](const DecompEntry& e, char32_t c) { return e.cp < c; });
  if (it != std::end(kDecomp) && it->cp == cp) return it;
  return nullptr;
}

// Returns the primary composite for <a, b>, or 0 if the pair does not
// compose.  U+0000 never composes, so 0 is a safe sentinel.
char32_t compose_pair(char32_t a, char32_t b) {
  // Hangul L+V and LV+T.
  if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount && b >= kHangulVBase &&
      b < kHangulVBase + kHangulVCount) {
    return kHangulSBase + ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) * kHangulTCount;
  }
  if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount &&
      (a - kHangulSBase) % kHangulTCount == 0 && b > kHangulTBase &&
      b < kHangulTBase + kHangulTCount) {
    return a + (b - kHangulTBase);
  }
  uint64_t key = (uint64_t(a) << 32) | uint64_t(b);
  auto* it = std::lower_bound(std::begin(kComp), std::end(kComp), key,
                              [](const CompEntry& e, uint64_t k) { return e.key < k; });
  if (it != std::end(kComp) && it->key == key) return it->composed;
  return 0;
}

void decompose_into(char32_t cp, std::u32string& out) {
  if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
    char32_t s = cp - kHangulSBase;
    out.push_back(kHangulLBase + s / kHangulNCount);
    out.push_back(kHangulVBase + (s % kHangulNCount) / kHangulTCount);
    if (s % kHangulTCount != 0) out.push_back(kHangulTBase + s % kHangulTCount);
    return;
  }
  if (const DecompEntry* e = find_decomposition(cp)) {
    out.append(e->out, e->len);
    return;
  }
  out.push_back(cp);
}

// Canonical ordering: stable-sort maximal runs of nonzero-ccc characters by
// combining class.  Runs are short (a handful of marks), so insertion sort.
void canonical_order(std::u32string& s) {
  for (std::size_t i = 1; i < s.size(); ++i) {
    int cc = combining_class(s[i]);
    if (cc == 0) continue;
    std::size_t j = i;
    while (j > 0 && combining_class(s[j - 1]) > cc) {
      std::swap(s[j - 1], s[j]);
      --j;
    }
  }
}

}  // namespace

std::string nfc(std::string_view utf8_text) {
  // ASCII is closed under NFC; skip the whole pipeline when possible.
  bool ascii = true;
  for (unsigned char c : utf8_text) {
    if (c >= 0x80) {
      ascii = false;
      break;
    }
  }
  if (ascii) return std::string(utf8_text);
  if (!utf8::is_valid(utf8_text)) {
    throw std::invalid_argument("nfc: input is not valid UTF-8");
  }

  std::u32string decoded = utf8::decode(utf8_text);
  std::u32string d;
  d.reserve(decoded.size() + decoded.size() / 8);
  for (char32_t cp : decoded) decompose_into(cp, d);
  canonical_order(d);

  // Canonical composition: each character combines with the last starter
  // unless a character in between blocks it (a starter, or a mark with
  // combining class >= its own).
  std::u32string out;
  out.reserve(d.size());
  std::size_t starter = std::u32string::npos;
  int prev_cc = -1;  // ccc of the last kept char after the starter; -1 if none
  for (char32_t cp : d) {
    int cc = combining_class(cp);
    if (starter != std::u32string::npos && prev_cc < cc) {
      if (char32_t composed = compose_pair(out[starter], cp)) {
        out[starter] = composed;
        continue;
      }
    }
    if (cc == 0) {
      starter = out.size();
      prev_cc = -1;
    } else {
      prev_cc = cc;
    }
    out.push_back(cp);
  }
  return utf8::encode(out);
}

}  // namespace repro::norm
