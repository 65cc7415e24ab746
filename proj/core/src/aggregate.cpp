#include "repro/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <utility>

#include <json.hpp>
#include "repro/utf8.hpp"

namespace repro::agg {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

double median_of(std::vector<double> values) {
  if (values.empty()) throw std::logic_error("median of empty set");
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw std::logic_error("mean of empty set");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Fixed-precision rendering so report files are byte-stable across runs.
std::string fmt_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string record_field(const io::AnalyzedRecord& record, const std::string& name) {
  if (name == "source") return record.record.source;
  if (name == "text_type") return record.record.text_type;
  if (name == "task") return record.record.task;
  if (name == "condition") return record.record.system_prompt_condition;
  throw std::invalid_argument("unknown group-by field: " + name +
                              " (expected source, text_type, task, or condition)");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

// The task -> text type -> overall rollup shared by balanced_mean and the
// balanced.csv section of emit_report.
BalancedResult balance(const std::vector<const io::AnalyzedRecord*>& records,
                       BalanceLevel level, bool balance_over_tasks) {
  BalancedResult result;
  if (records.empty()) {
    result.warnings.push_back("no records to aggregate");
    return result;
  }

  // (text_type, task) -> raw rates, ordered so output is deterministic.
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_task;
  for (const io::AnalyzedRecord* r : records) {
    by_task[{r->record.text_type, r->record.task}].push_back(r->overlap_rate);
  }

  if (level == BalanceLevel::kTask) {
    for (const auto& [key, rates] : by_task) {
      result.entries.push_back(
          {key.first, key.second, mean_of(rates), median_of(rates), rates.size()});
    }
    return result;
  }

  // text_type -> (task means, raw rates).
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_type;
  for (const auto& [key, rates] : by_task) {
    auto& slot = by_type[key.first];
    slot.first.push_back(mean_of(rates));
    slot.second.insert(slot.second.end(), rates.begin(), rates.end());
  }

  std::vector<double> type_means;
  std::vector<double> all_rates;
  for (const auto& [type, slot] : by_type) {
    double mean = balance_over_tasks ? mean_of(slot.first) : mean_of(slot.second);
    type_means.push_back(mean);
    all_rates.insert(all_rates.end(), slot.second.begin(), slot.second.end());
    if (level == BalanceLevel::kTextType) {
      result.entries.push_back({type, "", mean, median_of(slot.second), slot.second.size()});
    }
  }

  if (level == BalanceLevel::kOverall) {
    result.entries.push_back(
        {"", "", mean_of(type_means), median_of(all_rates), all_rates.size()});
  }
  return result;
}

std::vector<const io::AnalyzedRecord*> as_pointers(
    const std::vector<io::AnalyzedRecord>& records) {
  std::vector<const io::AnalyzedRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const io::AnalyzedRecord& r : records) ptrs.push_back(&r);
  return ptrs;
}

// Fraction of `sorted` at or above `cutoff`; the values are sorted ascending.
template <typename T, typename U>
double tail_fraction(const std::vector<T>& sorted, U cutoff) {
  if (sorted.empty()) return 0.0;
  auto first = std::lower_bound(sorted.begin(), sorted.end(), static_cast<T>(cutoff));
  return static_cast<double>(sorted.end() - first) / static_cast<double>(sorted.size());
}

TailCurves curves_over(const std::vector<const io::AnalyzedRecord*>& records,
                       const std::vector<uint64_t>& length_grid,
                       const std::vector<double>& rate_grid) {
  TailCurves curves;
  curves.length_grid = length_grid;
  curves.rate_grid = rate_grid;
  curves.count = records.size();

  std::vector<uint64_t> lengths;
  std::vector<double> rates;
  lengths.reserve(records.size());
  rates.reserve(records.size());
  for (const io::AnalyzedRecord* r : records) {
    lengths.push_back(r->max_reproduction_len);
    rates.push_back(r->overlap_rate);
  }
  std::sort(lengths.begin(), lengths.end());
  std::sort(rates.begin(), rates.end());

  curves.length_tail.reserve(length_grid.size());
  for (uint64_t cutoff : length_grid) curves.length_tail.push_back(tail_fraction(lengths, cutoff));
  curves.rate_tail.reserve(rate_grid.size());
  for (double cutoff : rate_grid) curves.rate_tail.push_back(tail_fraction(rates, cutoff));
  return curves;
}

using GroupMap = std::map<std::vector<std::string>, std::vector<const io::AnalyzedRecord*>>;

GroupMap group_records(const std::vector<const io::AnalyzedRecord*>& records,
                       const std::vector<std::string>& group_by) {
  if (group_by.empty()) throw std::invalid_argument("group-by field list is empty");
  GroupMap groups;
  for (const io::AnalyzedRecord* r : records) {
    std::vector<std::string> key;
    key.reserve(group_by.size());
    for (const std::string& field : group_by) key.push_back(record_field(*r, field));
    groups[std::move(key)].push_back(r);
  }
  return groups;
}

}  // namespace

BalancedResult balanced_mean(const std::vector<io::AnalyzedRecord>& records,
                             BalanceLevel level, bool balance_over_tasks) {
  return balance(as_pointers(records), level, balance_over_tasks);
}

std::vector<uint64_t> default_length_grid() {
  std::vector<uint64_t> grid;
  // 25 log-spaced points spanning 10..10,000 (an eighth of a decade apart).
  for (int k = 0; k <= 24; ++k) {
    grid.push_back(static_cast<uint64_t>(std::llround(std::pow(10.0, 1.0 + k / 8.0))));
  }
  for (uint64_t landmark : {30u, 50u, 100u, 1000u}) grid.push_back(landmark);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<double> default_rate_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 50; ++k) grid.push_back(k / 50.0);
  return grid;
}

TailCurves tail_curves(const std::vector<io::AnalyzedRecord>& records,
                       const std::vector<uint64_t>& length_grid,
                       const std::vector<double>& rate_grid) {
  return curves_over(as_pointers(records), length_grid, rate_grid);
}

std::vector<GroupStats> group_stats(const std::vector<io::AnalyzedRecord>& records,
                                    const std::vector<std::string>& group_by) {
  GroupMap groups = group_records(as_pointers(records), group_by);
  std::vector<GroupStats> stats;
  stats.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    std::vector<double> rates;
    rates.reserve(members.size());
    for (const io::AnalyzedRecord* r : members) rates.push_back(r->overlap_rate);
    stats.push_back({key, members.size(), mean_of(rates), median_of(rates)});
  }
  return stats;
}

ReportResult emit_report(const std::vector<io::AnalyzedRecord>& records,
                         const std::string& out_dir, const ReportOptions& options) {
  ReportResult result;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

  std::vector<const io::AnalyzedRecord*> usable;
  std::size_t refusals = 0;
  for (const io::AnalyzedRecord& r : records) {
    if (r.refusal) {
      ++refusals;
    } else {
      usable.push_back(&r);
    }
  }
  if (refusals > 0) {
    result.warnings.push_back("excluded " + std::to_string(refusals) +
                              " refusal record(s) from the report");
  }
  if (!records.empty() && refusals == records.size()) {
    result.warnings.push_back("all records were refusals; report contains headers only");
  }

  GroupMap groups = group_records(usable, options.group_by);

  std::string field_header;
  for (const std::string& field : options.group_by) {
    if (!field_header.empty()) field_header += ',';
    field_header += csv_field(field);
  }

  // summary.csv: one row per group.
  result.files.summary_csv = (fs::path(out_dir) / "summary.csv").string();
  {
    std::ofstream out = open_out(result.files.summary_csv);
    out << field_header << ",count,mean_overlap_rate,median_overlap_rate\n";
    for (const auto& [key, members] : groups) {
      std::vector<double> rates;
      rates.reserve(members.size());
      for (const io::AnalyzedRecord* r : members) rates.push_back(r->overlap_rate);
      for (const std::string& value : key) out << csv_field(value) << ',';
      out << members.size() << ',' << fmt_double(mean_of(rates)) << ','
          << fmt_double(median_of(rates)) << '\n';
    }
    finish_out(out, result.files.summary_csv);
  }

  // balanced.csv: the task -> text type -> overall rollup per (source,
  // condition) pair, all three levels.
  result.files.balanced_csv = (fs::path(out_dir) / "balanced.csv").string();
  {
    std::ofstream out = open_out(result.files.balanced_csv);
    out << "source,condition,level,text_type,task,count,balanced_mean,median_overlap_rate\n";
    GroupMap by_model = group_records(usable, {"source", "condition"});
    for (const auto& [key, members] : by_model) {
      const std::string prefix = csv_field(key[0]) + ',' + csv_field(key[1]) + ',';
      struct LevelRow {
        const char* name;
        BalanceLevel level;
      };
      for (LevelRow row : {LevelRow{"task", BalanceLevel::kTask},
                           LevelRow{"text_type", BalanceLevel::kTextType},
                           LevelRow{"overall", BalanceLevel::kOverall}}) {
        BalancedResult balanced = balance(members, row.level, options.balance_over_tasks);
        for (const BalancedEntry& entry : balanced.entries) {
          out << prefix << row.name << ',' << csv_field(entry.text_type) << ','
              << csv_field(entry.task) << ',' << entry.count << ','
              << fmt_double(entry.mean) << ',' << fmt_double(entry.median) << '\n';
        }
      }
    }
    finish_out(out, result.files.balanced_csv);
  }

  // curves.csv: both tail curves per group, one grid point per row.
  result.files.curves_csv = (fs::path(out_dir) / "curves.csv").string();
  {
    std::ofstream out = open_out(result.files.curves_csv);
    out << field_header << ",curve,x,fraction\n";
    for (const auto& [key, members] : groups) {
      std::string prefix;
      for (const std::string& value : key) prefix += csv_field(value) + ',';
      TailCurves curves = curves_over(members, options.length_grid, options.rate_grid);
      for (std::size_t i = 0; i < curves.length_grid.size(); ++i) {
        out << prefix << "length," << curves.length_grid[i] << ','
            << fmt_double(curves.length_tail[i]) << '\n';
      }
      for (std::size_t i = 0; i < curves.rate_grid.size(); ++i) {
        out << prefix << "rate," << fmt_double(curves.rate_grid[i]) << ','
            << fmt_double(curves.rate_tail[i]) << '\n';
      }
    }
    finish_out(out, result.files.curves_csv);
  }

  // snippets.jsonl: the top-k longest reproduced snippets per group, with
  // the snippet text sliced back out of the record.
  result.files.snippets_jsonl = (fs::path(out_dir) / "snippets.jsonl").string();
  {
    std::ofstream out = open_out(result.files.snippets_jsonl);
    for (const auto& [key, members] : groups) {
      struct Ranked {
        const io::AnalyzedRecord* record;
        io::SnippetSpan span;
      };
      std::vector<Ranked> ranked;
      for (const io::AnalyzedRecord* r : members) {
        for (const io::SnippetSpan& span : r->snippets) ranked.push_back({r, span});
      }
      std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.span.length != b.span.length) return a.span.length > b.span.length;
        if (a.record->record.record_id != b.record->record.record_id) {
          return a.record->record.record_id < b.record->record.record_id;
        }
        return a.span.start < b.span.start;
      });
      if (ranked.size() > options.top_k_snippets) ranked.resize(options.top_k_snippets);

      for (const Ranked& entry : ranked) {
        const std::string& text = entry.record->record.text;
        std::vector<uint32_t> offsets = utf8::char_offsets(text);
        if (entry.span.start + entry.span.length + 1 > offsets.size()) {
          throw std::runtime_error("snippet offsets out of range for record " +
                                   entry.record->record.record_id);
        }
        uint32_t lo = offsets[entry.span.start];
        uint32_t hi = offsets[entry.span.start + entry.span.length];
        Json line;
        Json group = Json::object();
        for (std::size_t i = 0; i < options.group_by.size(); ++i) group[options.group_by[i]] = key[i];
        line["group"] = std::move(group);
        line["record_id"] = entry.record->record.record_id;
        line["start"] = entry.span.start;
        line["length"] = entry.span.length;
        line["text"] = text.substr(lo, hi - lo);
        out << line.dump() << '\n';
      }
    }
    finish_out(out, result.files.snippets_jsonl);
  }

  return result;
}

}  // namespace repro::agg
