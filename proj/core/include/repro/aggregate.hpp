#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repro/records.hpp"

namespace repro::agg {

// How deep the balancing hierarchy reaches: per-task means, task-balanced
// per-text-type means, or the text-type-balanced overall mean.
enum class BalanceLevel { kTask, kTextType, kOverall };

struct BalancedEntry {
  std::string text_type;  // empty at the overall level
  std::string task;       // empty above the task level
  double mean = 0.0;      // balanced per the level
  double median = 0.0;    // always over raw per-record rates in the group
  std::size_t count = 0;  // raw record count in the group
};

struct BalancedResult {
  std::vector<BalancedEntry> entries;   // sorted by (text_type, task)
  std::vector<std::string> warnings;    // skipped empty groups
};

// Balanced means of overlap rates: mean within each task, then unweighted
// across tasks within a text type, then unweighted across text types.  With
// balance_over_tasks = false the text-type level uses plain per-record
// means instead of task means.  Empty groups are omitted with a warning.
BalancedResult balanced_mean(const std::vector<io::AnalyzedRecord>& records,
                             BalanceLevel level, bool balance_over_tasks = true);

struct TailCurves {
  std::vector<uint64_t> length_grid;
  std::vector<double> length_tail;  // fraction with max_reproduction_len >= L
  std::vector<double> rate_grid;
  std::vector<double> rate_tail;    // fraction with overlap_rate >= r
  std::size_t count = 0;
};

// Default length grid: log-spaced 10..10,000 plus the landmark values
// {30, 50, 100, 1000}.  Default rate grid: 0..1 in steps of 1/50.
std::vector<uint64_t> default_length_grid();
std::vector<double> default_rate_grid();

// Tail distributions over one set of records; empty input yields all-zero
// curves with count 0.
TailCurves tail_curves(const std::vector<io::AnalyzedRecord>& records,
                       const std::vector<uint64_t>& length_grid = default_length_grid(),
                       const std::vector<double>& rate_grid = default_rate_grid());

// Plain per-group statistics for the summary table.
struct GroupStats {
  std::vector<std::string> key;  // values of the group-by fields, in order
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
};

// Groups records by the named fields (source, text_type, task, condition)
// and computes per-group stats, sorted by key.  Throws std::invalid_argument
// on an unknown field name.
std::vector<GroupStats> group_stats(const std::vector<io::AnalyzedRecord>& records,
                                    const std::vector<std::string>& group_by);

struct ReportOptions {
  std::vector<std::string> group_by = {"source", "text_type", "task"};
  std::size_t top_k_snippets = 5;
  bool balance_over_tasks = true;
  std::vector<uint64_t> length_grid = default_length_grid();
  std::vector<double> rate_grid = default_rate_grid();
};

struct ReportFiles {
  std::string summary_csv;
  std::string balanced_csv;
  std::string curves_csv;
  std::string snippets_jsonl;
};

// Writes summary.csv, balanced.csv, curves.csv, and snippets.jsonl under
// out_dir (created if needed) with fully deterministic content and ordering.
// Records flagged as refusals are excluded and reported in the return
// value's warning list.
struct ReportResult {
  ReportFiles files;
  std::vector<std::string> warnings;
};

ReportResult emit_report(const std::vector<io::AnalyzedRecord>& records,
                         const std::string& out_dir, const ReportOptions& options = {});

}  // namespace repro::agg
