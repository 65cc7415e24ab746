#pragma once

#include <cstdint>
#include <span>

namespace repro::corpus {

// Builds the suffix array of `text` into `sa` using induced sorting (SA-IS).
// `sa` must have exactly text.size() entries. Runs in O(n) time and uses
// roughly one bit per input byte of scratch beyond the output buffer.
void build_suffix_array(std::span<const uint8_t> text, std::span<uint32_t> sa);

}  // namespace repro::corpus
