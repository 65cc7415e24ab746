#include "repro/suffix_array.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace repro::corpus {
namespace {

constexpr uint32_t kEmpty = 0xFFFFFFFFu;

// SA-IS over an alphabet of size K. A virtual sentinel smaller than every
// character is assumed at position n; it is never stored in SA. The last
// real character is therefore always L-type and seeds the left-to-right
// induction pass.
template <typename Char>
void sais(const Char* t, uint32_t* sa, uint32_t n, uint32_t k) {
  if (n == 0) return;
  if (n == 1) {
    sa[0] = 0;
    return;
  }

  // Type classification: is_s[i] is true when suffix i is S-type.
  std::vector<bool> is_s(n);
  is_s[n - 1] = false;
  for (uint32_t i = n - 1; i-- > 0;) {
    is_s[i] = t[i] < t[i + 1] || (t[i] == t[i + 1] && is_s[i + 1]);
  }
  auto is_lms = [&](uint32_t i) { return i > 0 && is_s[i] && !is_s[i - 1]; };

  // Bucket boundaries. Small alphabets keep a persistent count array and
  // derive heads/tails from it. Recursion levels can have alphabets in the
  // millions, where a second array is real memory; there we keep only one
  // array and recount on demand, trading an extra O(n) scan per pass for
  // half the workspace.
  const bool recount = k > (1u << 21);
  std::vector<uint32_t> cnt(recount ? 0 : k, 0), bkt(k);
  if (!recount) {
    for (uint32_t i = 0; i < n; ++i) ++cnt[t[i]];
  }
  auto bkt_heads = [&] {
    if (recount) {
      std::fill(bkt.begin(), bkt.end(), 0);
      for (uint32_t i = 0; i < n; ++i) ++bkt[t[i]];
      uint32_t sum = 0;
      for (uint32_t c = 0; c < k; ++c) {
        const uint32_t c0 = bkt[c];
        bkt[c] = sum;
        sum += c0;
      }
      return;
    }
    uint32_t sum = 0;
    for (uint32_t c = 0; c < k; ++c) {
      bkt[c] = sum;
      sum += cnt[c];
    }
  };
  auto bkt_tails = [&] {
    if (recount) {
      std::fill(bkt.begin(), bkt.end(), 0);
      for (uint32_t i = 0; i < n; ++i) ++bkt[t[i]];
      uint32_t sum = 0;
      for (uint32_t c = 0; c < k; ++c) {
        sum += bkt[c];
        bkt[c] = sum;
      }
      return;
    }
    uint32_t sum = 0;
    for (uint32_t c = 0; c < k; ++c) {
      sum += cnt[c];
      bkt[c] = sum;
    }
  };

  // Induces the order of all L-type then all S-type suffixes from the LMS
  // entries currently seeded in SA.
  auto induce = [&] {
    bkt_heads();
    sa[bkt[t[n - 1]]++] = n - 1;  // predecessor of the virtual sentinel
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t j = sa[i];
      if (j != kEmpty && j > 0 && !is_s[j - 1]) sa[bkt[t[j - 1]]++] = j - 1;
    }
    bkt_tails();
    for (uint32_t i = n; i-- > 0;) {
      uint32_t j = sa[i];
      if (j != kEmpty && j > 0 && is_s[j - 1]) sa[--bkt[t[j - 1]]] = j - 1;
    }
  };

  // Pass 1: sort LMS substrings by seeding LMS positions in any order.
  std::fill(sa, sa + n, kEmpty);
  bkt_tails();
  uint32_t n_lms = 0;
  for (uint32_t i = 1; i < n; ++i) {
    if (is_lms(i)) {
      sa[--bkt[t[i]]] = i;
      ++n_lms;
    }
  }
  induce();

  if (n_lms > 0) {
    // Compact the now-sorted LMS positions to the front of SA.
    uint32_t n1 = 0;
    for (uint32_t i = 0; i < n; ++i) {
      if (is_lms(sa[i])) sa[n1++] = sa[i];
    }

    // Name LMS substrings. Two substrings are equal when their characters
    // match up to and including the next LMS position on both sides.
    auto lms_equal = [&](uint32_t a, uint32_t b) {
      if (t[a] != t[b]) return false;
      for (uint32_t d = 1;; ++d) {
        if (a + d == n || b + d == n) return false;
        bool al = is_lms(a + d), bl = is_lms(b + d);
        if (al != bl || t[a + d] != t[b + d]) return false;
        if (al) return true;
      }
    };
    std::fill(sa + n1, sa + n, kEmpty);
    uint32_t names = 0;
    uint32_t prev = kEmpty;
    for (uint32_t i = 0; i < n1; ++i) {
      uint32_t pos = sa[i];
      if (prev == kEmpty || !lms_equal(prev, pos)) {
        ++names;
        prev = pos;
      }
      sa[n1 + pos / 2] = names - 1;  // LMS positions are >= 2 apart
    }

    // Gather names into the reduced string at the end of SA. Walking
    // backwards keeps the writer behind the reader.
    uint32_t* t1 = sa + (n - n1);
    {
      uint32_t w = n1;
      for (uint32_t i = n1 + n / 2 + 1; i-- > n1;) {
        if (i < n && sa[i] != kEmpty) t1[--w] = sa[i];
      }
    }

    if (names < n1) {
      sais<uint32_t>(t1, sa, n1, names);
    } else {
      for (uint32_t i = 0; i < n1; ++i) sa[t1[i]] = i;
    }

    // Map reduced indices back to text positions of LMS suffixes.
    {
      uint32_t w = 0;
      for (uint32_t i = 1; i < n; ++i) {
        if (is_lms(i)) t1[w++] = i;
      }
    }
    for (uint32_t i = 0; i < n1; ++i) sa[i] = t1[sa[i]];

    // Pass 2: seed LMS positions in their final relative order and induce.
    std::fill(sa + n1, sa + n, kEmpty);
    bkt_tails();
    for (uint32_t i = n1; i-- > 0;) {
      uint32_t j = sa[i];
      sa[i] = kEmpty;
      sa[--bkt[t[j]]] = j;
    }
  } else {
    std::fill(sa, sa + n, kEmpty);
  }
  induce();
}

}  // namespace

void build_suffix_array(std::span<const uint8_t> text, std::span<uint32_t> sa) {
  if (sa.size() != text.size()) {
    throw std::invalid_argument("suffix array buffer size must match text size");
  }
  if (text.size() >= kEmpty) {
    throw std::invalid_argument("text too large for 32-bit suffix array");
  }
  sais<uint8_t>(text.data(), sa.data(), static_cast<uint32_t>(text.size()), 256);
}

}  // namespace repro::corpus
