#include "match_engine.hpp"

#include <cstring>
#include <stdexcept>

#include "repro/suffix_array.hpp"

namespace repro::corpus::detail {
namespace {

// First mismatch index in [k, lim) between a and b (lim when equal).
inline uint32_t common_prefix_from(const uint8_t* a, const uint8_t* b,
                                   uint32_t lim, uint32_t k) {
  while (k + 8 <= lim) {
    uint64_t x, y;
    std::memcpy(&x, a + k, 8);
    std::memcpy(&y, b + k, 8);
    if (x != y) {
      return k + (static_cast<uint32_t>(__builtin_ctzll(x ^ y)) >> 3);
    }
    k += 8;
  }
  while (k < lim && a[k] == b[k]) ++k;
  return k;
}

}  // namespace

void Shard::build_suffix_array_and_buckets() {
  sa.assign(text.size(), 0);
  build_suffix_array({reinterpret_cast<const uint8_t*>(text.data()), text.size()},
                     sa);
  build_buckets();
}

void Shard::build_buckets() {
  const auto* t = reinterpret_cast<const uint8_t*>(text.data());
  const std::size_t n = text.size();
  std::vector<uint32_t> count(65536, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++count[(static_cast<uint32_t>(t[i]) << 8) | t[i + 1]];
  }
  if (n > 0) {
    // The final one-byte suffix is the trailing 0xff sentinel; it sorts at
    // the head of the 0xff block, i.e. within bucket 0xff00. Queries never
    // probe buckets containing 0xff, so the exact slot is immaterial.
    ++count[0xff00];
  }
  bucket.assign(65537, 0);
  uint32_t sum = 0;
  for (uint32_t p = 0; p < 65536; ++p) {
    bucket[p] = sum;
    sum += count[p];
  }
  bucket[65536] = sum;
}

uint32_t Shard::longest_prefix_bytes(const uint8_t* p, uint32_t m) const {
  if (m == 0 || sa.empty()) return 0;
  uint32_t ms = 0;
  uint32_t off = 0;
  match_stats(p, m, &off, 1, &ms);
  return ms;
}

// Per-position longest-prefix search, Manber–Myers style: the search keeps
// exact pattern lcps with both range endpoints, so each probe resumes
// comparing at min(l, r) instead of rescanning, and the running maximum of
// all probe lcps is exactly the longest matched prefix. Lanes advance
// through small stages round-robin; every memory access is prefetched one
// stage ahead so the single core keeps several misses in flight.
void Shard::match_stats(const uint8_t* q, uint32_t len, const uint32_t* qoff,
                        std::size_t nchars, uint32_t* ms_bytes) const {
  if (nchars == 0 || sa.empty()) return;
  const auto* t = reinterpret_cast<const uint8_t*>(text.data());
  const uint32_t n = static_cast<uint32_t>(text.size());

  auto one_byte_hit = [&](uint8_t b0) -> uint32_t {
    return bucket[(static_cast<uint32_t>(b0) + 1) << 8] >
                   bucket[static_cast<uint32_t>(b0) << 8]
               ? 1
               : 0;
  };

  // Each probe costs two lane visits: one to turn the prefetched SA slot
  // into a text prefetch, one to walk the comparison and choose the next
  // probe. With enough lanes in flight both misses stay covered.
  enum class Stage : uint8_t { kEndpointFetch, kEndpointWalk, kStepA, kStepB };

  struct Lane {
    std::size_t i = 0;      // index into qoff/ms_bytes
    const uint8_t* p = nullptr;
    uint32_t m = 0;         // pattern length in bytes
    uint32_t lo = 0, hi = 0;  // inclusive endpoints, S[lo] < pat <= S[hi]
    uint32_t l = 0, r = 0;    // lcp(pat, S[lo]) and lcp(pat, S[hi])
    uint32_t mid = 0, pos = 0;
    uint32_t best = 0;
    Stage stage = Stage::kEndpointFetch;
    bool active = false;
  };

  constexpr std::size_t kLanes = 24;
  Lane lanes[kLanes];
  std::size_t next = 0;     // next query position to schedule
  std::size_t active = 0;

  // Starts position `i` on `lane`; returns false when it resolved instantly.
  auto start = [&](Lane& lane, std::size_t i) -> bool {
    const uint32_t off = qoff[i];
    const uint32_t m = len - off;
    const uint8_t* p = q + off;
    if (m == 0 || ms_bytes[i] >= m) return false;
    if (m == 1) {
      uint32_t v = one_byte_hit(p[0]);
      if (v > ms_bytes[i]) ms_bytes[i] = v;
      return false;
    }
    const uint32_t pre = (static_cast<uint32_t>(p[0]) << 8) | p[1];
    const uint32_t blo = bucket[pre], bhi = bucket[pre + 1];
    if (blo == bhi) {
      uint32_t v = one_byte_hit(p[0]);
      if (v > ms_bytes[i]) ms_bytes[i] = v;
      return false;
    }
    lane.i = i;
    lane.p = p;
    lane.m = m;
    lane.lo = blo;
    lane.hi = bhi - 1;
    lane.best = 2;
    lane.stage = Stage::kEndpointFetch;
    lane.active = true;
    __builtin_prefetch(&sa[lane.lo]);
    __builtin_prefetch(&sa[lane.hi]);
    return true;
  };

  auto finish = [&](Lane& lane) {
    if (lane.best > ms_bytes[lane.i]) ms_bytes[lane.i] = lane.best;
    lane.active = false;
  };

  // Exact lcp of the lane's pattern with the suffix at text position pos,
  // starting the scan at already-known-equal depth k. Also reports whether
  // that suffix sorts before the pattern.
  auto probe = [&](const Lane& lane, uint32_t pos, uint32_t k,
                   bool& suffix_less) -> uint32_t {
    const uint32_t lim = std::min(n - pos, lane.m);
    const uint32_t e = common_prefix_from(t + pos, lane.p, lim, k);
    if (e == lim) {
      // Text suffixes end with 0xff, which no pattern contains, so only the
      // pattern can run out: the suffix then sorts after it.
      suffix_less = false;
    } else {
      suffix_less = t[pos + e] < lane.p[e];
    }
    return e;
  };

  while (active > 0 || next < nchars) {
    for (std::size_t li = 0; li < kLanes; ++li) {
      Lane& lane = lanes[li];
      if (!lane.active) {
        while (next < nchars) {
          if (start(lane, next++)) {
            ++active;
            break;
          }
        }
        continue;
      }

      switch (lane.stage) {
        case Stage::kEndpointFetch: {
          __builtin_prefetch(t + sa[lane.lo] + 2);
          __builtin_prefetch(t + sa[lane.hi] + 2);
          lane.stage = Stage::kEndpointWalk;
          break;
        }
        case Stage::kEndpointWalk: {
          bool lo_less = false, hi_less = false;
          const uint32_t l = probe(lane, sa[lane.lo], 2, lo_less);
          lane.best = std::max(lane.best, l);
          if (!lo_less) {  // pat <= first in-bucket suffix: neighbors probed
            finish(lane);
            --active;
            break;
          }
          const uint32_t r = probe(lane, sa[lane.hi], 2, hi_less);
          lane.best = std::max(lane.best, r);
          if (hi_less || lane.hi - lane.lo <= 1) {
            finish(lane);
            --active;
            break;
          }
          lane.l = l;
          lane.r = r;
          lane.mid = lane.lo + (lane.hi - lane.lo) / 2;
          __builtin_prefetch(&sa[lane.mid]);
          lane.stage = Stage::kStepA;
          break;
        }
        case Stage::kStepA: {
          lane.pos = sa[lane.mid];
          __builtin_prefetch(t + lane.pos + std::min(lane.l, lane.r));
          lane.stage = Stage::kStepB;
          break;
        }
        case Stage::kStepB: {
          bool less = false;
          const uint32_t e =
              probe(lane, lane.pos, std::min(lane.l, lane.r), less);
          lane.best = std::max(lane.best, e);
          if (less) {
            lane.lo = lane.mid;
            lane.l = e;
          } else {
            lane.hi = lane.mid;
            lane.r = e;
          }
          if (lane.hi - lane.lo <= 1) {
            finish(lane);
            --active;
            break;
          }
          lane.mid = lane.lo + (lane.hi - lane.lo) / 2;
          __builtin_prefetch(&sa[lane.mid]);
          lane.stage = Stage::kStepA;
          break;
        }
      }
    }
  }
}

uint64_t Shard::memory_footprint() const {
  uint64_t docs_bytes = 0;
  for (const auto& d : docs) docs_bytes += sizeof(DocMeta) + d.id.capacity();
  return text.capacity() + sa.capacity() * sizeof(uint32_t) +
         bucket.capacity() * sizeof(uint32_t) + docs_bytes;
}

}  // namespace repro::corpus::detail
