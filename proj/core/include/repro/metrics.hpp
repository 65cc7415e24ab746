#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repro/corpus_index.hpp"

namespace repro::metrics {

// Per-character longest-match lengths of a text against a reference corpus.
// raw[i] is the length, in characters, of the longest prefix of the suffix
// starting at character i that occurs verbatim in the corpus.
struct MatchProfile {
  std::size_t text_len = 0;
  std::vector<uint32_t> raw;
};

// Outputs of prompt discounting: prompt_overlap[i] is the longest common
// substring of the match at i with the prompt; discounted[i] is the match
// length with that overlap subtracted.
struct PromptDiscount {
  std::vector<uint32_t> prompt_overlap;
  std::vector<uint32_t> discounted;
};

// Everything derived from a text, its prompt, and an index, assembled in one
// place for reporting.
struct ReproductionProfile {
  std::vector<uint32_t> prompt_overlap;
  std::vector<uint32_t> discounted;
  std::vector<uint32_t> reproduction;
  double overlap_rate = 0.0;
};

enum class SnippetKind {
  kMaximalSpan,  // maximal contiguous run above the threshold
  kFixedWindow,  // fixed-length sampled window
};

struct ReproducedSnippet {
  std::size_t start = 0;   // character offset into the text
  std::size_t length = 0;  // character count
  std::string text;        // the UTF-8 slice [start, start + length)
  SnippetKind kind = SnippetKind::kMaximalSpan;
};

// Result of sampling one fixed-size window from each candidate class; a
// class with no qualifying window yields no snippet.
struct FixedWindowSample {
  std::optional<ReproducedSnippet> reproduced;
  std::optional<ReproducedSnippet> non_reproduced;
};

// Computes raw match lengths for every character position of `text`.
// Throws std::invalid_argument if `text` is not valid UTF-8.
MatchProfile match_profile(const corpus::CorpusIndex& index, std::string_view text);
MatchProfile match_profile(const corpus::IndexGroup& group, std::string_view text);

// For each position i, finds the longest common substring between the match
// text[i : i + raw[i]) and `prompt`, and subtracts it from the raw length.
// An empty prompt discounts nothing.  Throws std::invalid_argument if the
// profile does not correspond to `text` or inputs are not valid UTF-8.
PromptDiscount prompt_discount(const MatchProfile& profile, std::string_view text,
                               std::string_view prompt);

// Converts per-suffix lengths to per-character reproduction lengths:
// out[i] = max over { j : j <= i < j + raw[j] } of discounted[j], 0 when no
// match covers i.  Throws std::invalid_argument on a length mismatch.
std::vector<uint32_t> reproduction_lengths(const std::vector<uint32_t>& raw,
                                           const std::vector<uint32_t>& discounted);

// Fraction of characters whose reproduction length reaches `threshold`;
// an empty array yields 0.  Throws std::invalid_argument if threshold is 0.
double overlap_rate(const std::vector<uint32_t>& reproduction, uint32_t threshold);

// Maximal contiguous spans where reproduction[i] >= threshold, sorted by
// start offset.  Throws std::invalid_argument if `reproduction` does not
// match the character count of `text`.
std::vector<ReproducedSnippet> extract_snippets(std::string_view text,
                                                const std::vector<uint32_t>& reproduction,
                                                uint32_t threshold);

// Enumerates windows of exactly `window_len` characters that start at a word
// boundary (text start or right after whitespace) and are entirely at or
// above the threshold (reproduced) or entirely below it (non-reproduced),
// then draws one window per class uniformly with the given seed.
FixedWindowSample sample_fixed_windows(std::string_view text,
                                       const std::vector<uint32_t>& reproduction,
                                       uint32_t threshold, std::size_t window_len,
                                       uint64_t rng_seed);

// Convenience composition of prompt_discount, reproduction_lengths, and
// overlap_rate for one record.
ReproductionProfile reproduction_profile(const MatchProfile& profile, std::string_view text,
                                         std::string_view prompt, uint32_t threshold);

}  // namespace repro::metrics
