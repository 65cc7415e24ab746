#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "repro/aggregate.hpp"

namespace repro::pipe {

// Version stamp recorded in every run manifest.
inline constexpr const char* kToolVersion = "0.1.0";

struct AnalyzeOptions {
  std::vector<std::string> index_paths;
  std::string records_path;
  std::string out_path;             // analyzed records, one JSON object per line
  uint32_t threshold = 50;          // characters
  std::string refusal_policy_path;  // empty = built-in policy
  uint64_t rng_seed = 0;            // sole randomness source (window sampling)
  std::size_t workers = 1;
  bool resume = false;              // reuse results already in out_path
  bool strict_records = false;      // abort on the first malformed input line
  std::size_t sample_window = 0;    // > 0: draw fixed windows of this many chars
};

struct AnalyzeStats {
  std::size_t input_records = 0;
  std::size_t analyzed = 0;       // records written to out_path
  std::size_t reused = 0;         // of those, carried over via resume
  std::size_t refusals = 0;       // dropped by the refusal filter
  std::size_t record_errors = 0;  // malformed lines plus per-record failures
  std::string config_digest;
  std::string dropped_path;
  std::string samples_path;       // empty unless sampling was requested
  std::string manifest_path;
  std::vector<std::string> error_messages;  // one per record error
};

// The full analysis pass: loads the indexes, filters refusals, computes
// per-record reproduction profiles (in parallel when workers > 1, output
// order always input order), and writes the analyzed / dropped / manifest
// files.  Reruns over identical inputs are byte-identical.  `progress`, when
// non-null, receives human-readable status lines.
AnalyzeStats run_analyze(const AnalyzeOptions& options, std::ostream* progress = nullptr);

struct ReportRunOptions {
  std::string analyzed_path;
  std::string out_dir;
  std::vector<std::string> group_by = {"source", "text_type", "task"};
  std::size_t top_k_snippets = 5;
  bool balance_over_tasks = true;
};

struct ReportStats {
  std::size_t records = 0;
  std::string config_digest;
  agg::ReportFiles files;
  std::string manifest_path;
  std::vector<std::string> warnings;
};

// Reads analyzed records (which must all carry the same config digest),
// emits the report files, and writes the run manifest next to them.
ReportStats run_report(const ReportRunOptions& options);

// Streaming SHA-256 of a file's bytes, hex-encoded.
std::string file_sha256_hex(const std::string& path);

// Deterministic per-record sampler seed: mixes the run seed with the
// record id so one --seed flag drives every draw.
uint64_t mix_seed(uint64_t base, std::string_view record_id);

// Sibling output paths derived from the analyzed-records path.
std::string dropped_path_for(const std::string& out_path);
std::string samples_path_for(const std::string& out_path);
std::string manifest_path_for(const std::string& out_path);

}  // namespace repro::pipe
