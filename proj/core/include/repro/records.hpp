#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace repro::io {

// One prompt/text pair with full provenance.  `source` is a model name or
// "human"; `task` is a taxonomy id or free-form; `text_type` is one of
// creative / expository / argumentative.
struct TextRecord {
  std::string record_id;
  std::string source;
  std::string task;
  std::string text_type;
  std::string prompt;
  std::string text;
  std::optional<int64_t> seed;
  std::optional<double> temperature;
  std::string system_prompt_condition = "none";

  bool operator==(const TextRecord&) const = default;
};

// Everything that parameterizes an analysis run.  The digest pins results to
// the exact configuration so reruns and resumption can be validated.
struct AnalysisConfig {
  uint32_t threshold = 50;           // reproduction length cutoff, characters
  bool normalize_nfc = false;        // must match the indexes in use
  std::string refusal_policy_path;   // empty = built-in policy
  std::vector<std::string> index_paths;
  uint64_t rng_seed = 0;             // feeds the fixed-window sampler

  // Hex SHA-256 over a canonical field serialization; any field change
  // yields a different digest.
  std::string digest() const;
};

struct SnippetSpan {
  uint64_t start = 0;   // character offset
  uint64_t length = 0;  // character count

  bool operator==(const SnippetSpan&) const = default;
};

// A TextRecord plus per-record analysis results.
struct AnalyzedRecord {
  TextRecord record;
  bool refusal = false;
  std::string refusal_reason;  // empty unless refusal
  double overlap_rate = 0.0;
  uint64_t max_reproduction_len = 0;
  std::vector<SnippetSpan> snippets;  // maximal spans at the run's threshold
  std::string config_digest;

  bool operator==(const AnalyzedRecord&) const = default;
};

// A skipped input line: number (1-based), error message, raw content.
struct RecordIssue {
  std::size_t line = 0;
  std::string message;
  std::string raw;
};

// Streaming reader over line-delimited records.  In strict mode the first
// malformed line throws std::runtime_error ("line N: ..."); in lenient mode
// bad lines are collected as issues and iteration continues.  Duplicate
// record_ids count as malformed.
class RecordReader {
 public:
  RecordReader(const std::string& path, bool strict);
  ~RecordReader();
  RecordReader(RecordReader&&) noexcept;
  RecordReader& operator=(RecordReader&&) noexcept;

  std::optional<TextRecord> next();
  const std::vector<RecordIssue>& issues() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Whole-file conveniences.
std::vector<TextRecord> read_records(const std::string& path, bool strict = true);
void write_records(const std::string& path, const std::vector<TextRecord>& records);

std::vector<AnalyzedRecord> read_analyzed(const std::string& path, bool strict = true);
void write_analyzed(const std::string& path, const std::vector<AnalyzedRecord>& records);

// Serialization of single records (one line, no trailing newline); used by
// the streaming writers and the tests.
std::string to_line(const TextRecord& record);
std::string to_line(const AnalyzedRecord& record);

}  // namespace repro::io
