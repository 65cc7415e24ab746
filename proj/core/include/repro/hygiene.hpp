#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "repro/records.hpp"

namespace repro::hygiene {

// Which generations count as refusals: anything shorter than min_length
// characters or starting with one of the listed prefixes (after stripping
// leading whitespace).
struct RefusalPolicy {
  uint32_t min_length = 20;
  std::vector<std::string> refusal_prefixes;  // matched in order, verbatim

  // The default policy compiled into the library; data/refusal_policy.txt
  // ships the same content.
  static RefusalPolicy builtin();
  // Parses a policy file: '#' comment and blank lines are ignored, the
  // first payload line must be "min_length <N>", every following line is a
  // literal prefix.
  static RefusalPolicy load(const std::string& path);
  void save(const std::string& path) const;
};

struct RefusalCheck {
  bool refusal = false;
  std::string reason;  // names the matched rule; empty when not a refusal
};

// True iff the text is shorter than the policy minimum (in characters,
// counted on the unstripped text) or starts with a listed prefix after
// leading whitespace.  Throws std::invalid_argument on invalid UTF-8.
RefusalCheck is_refusal(std::string_view text, const RefusalPolicy& policy);

struct DroppedRecord {
  io::TextRecord record;
  std::string reason;
};

struct FilterResult {
  std::vector<io::TextRecord> kept;
  std::vector<DroppedRecord> dropped;
};

// Partitions records by the refusal check, preserving input order in both
// halves.
FilterResult filter_records(const std::vector<io::TextRecord>& records,
                            const RefusalPolicy& policy);

}  // namespace repro::hygiene
