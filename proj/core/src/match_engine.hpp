#pragma once

// Internal to the corpus index: one resident shard and its query machinery.

#include <cstdint>
#include <string>
#include <vector>

namespace repro::corpus::detail {

struct DocMeta {
  uint64_t start = 0;  // byte offset of the document inside the shard text
  uint64_t chars = 0;
  std::string id;
};

// Documents joined with 0xff separators plus a trailing 0xff sentinel.
// 0xff never occurs in well-formed UTF-8, so a valid query can neither
// match across a document boundary nor run past the end of the text.
struct Shard {
  std::string text;
  std::vector<uint32_t> sa;
  std::vector<DocMeta> docs;

  // SA ranges of two-byte prefixes: [bucket[p], bucket[p+1]) holds the
  // suffixes whose first two bytes form p. 65537 entries.
  std::vector<uint32_t> bucket;

  void build_suffix_array_and_buckets();  // build path: text and docs set
  void build_buckets();                   // load path: text and sa set

  // Frees the suffix array (and buckets) once they have been serialized.
  void release_suffix_array() {
    std::vector<uint32_t>().swap(sa);
    std::vector<uint32_t>().swap(bucket);
  }

  // Longest prefix of `pattern` occurring in the text, in bytes. The
  // pattern must be free of 0xff bytes (true for valid UTF-8).
  uint32_t longest_prefix_bytes(const uint8_t* pattern, uint32_t len) const;

  // Batched form: for every character offset qoff[i] of the query, computes
  // the longest prefix of q[qoff[i]..len) found in the text and maximizes it
  // into ms_bytes[i]. Searches are interleaved so cache misses overlap.
  void match_stats(const uint8_t* q, uint32_t len, const uint32_t* qoff,
                   std::size_t nchars, uint32_t* ms_bytes) const;

  uint64_t memory_footprint() const;
};

}  // namespace repro::corpus::detail
