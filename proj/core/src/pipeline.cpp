#include "repro/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "repro/corpus_index.hpp"
#include "repro/digest.hpp"
#include "repro/hygiene.hpp"
#include "repro/metrics.hpp"
#include "repro/records.hpp"
#include "repro/unicode_norm.hpp"
#include "repro/utf8.hpp"

namespace repro::pipe {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Inserts `suffix` before a trailing ".jsonl", else appends it.
std::string derive_path(const std::string& out_path, const std::string& suffix) {
  const std::string tail = ".jsonl";
  if (out_path.size() > tail.size() &&
      out_path.compare(out_path.size() - tail.size(), tail.size(), tail) == 0) {
    return out_path.substr(0, out_path.size() - tail.size()) + suffix + tail;
  }
  return out_path + suffix + ".jsonl";
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

void write_manifest(const std::string& path, const Json& manifest) {
  std::ofstream out = open_out(path);
  out << manifest.dump(2) << '\n';
  finish_out(out, path);
}

Json snippet_json(const metrics::ReproducedSnippet& snippet) {
  Json j;
  j["start"] = snippet.start;
  j["length"] = snippet.length;
  j["text"] = snippet.text;
  return j;
}

// Per-record work attached to its input position.
struct WorkItem {
  std::size_t input_index = 0;
  io::TextRecord record;  // normalized copy when the indexes are NFC
};

}  // namespace

std::string file_sha256_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  digest::Sha256Stream stream;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    stream.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw std::runtime_error("read failed: " + path);
  return digest::to_hex(stream.finish());
}

uint64_t mix_seed(uint64_t base, std::string_view record_id) {
  digest::Sha256Stream stream;
  stream.update_u64(base);
  stream.update(record_id);
  digest::Sha256 d = stream.finish();
  uint64_t value = 0;
  std::memcpy(&value, d.data(), sizeof(value));
  return value;
}

std::string dropped_path_for(const std::string& out_path) {
  return derive_path(out_path, ".dropped");
}

std::string samples_path_for(const std::string& out_path) {
  return derive_path(out_path, ".samples");
}

std::string manifest_path_for(const std::string& out_path) {
  return out_path + ".manifest.json";
}

AnalyzeStats run_analyze(const AnalyzeOptions& options, std::ostream* progress) {
  if (options.index_paths.empty()) {
    throw std::invalid_argument("analyze: at least one index is required");
  }
  if (options.out_path.empty()) {
    throw std::invalid_argument("analyze: output path is required");
  }

  // Load everything up front so configuration problems surface before any
  // output file is touched.
  corpus::IndexGroup group;
  for (const std::string& path : options.index_paths) {
    group.add(corpus::CorpusIndex::load(path));
  }
  const bool nfc = group.normalize_nfc();

  hygiene::RefusalPolicy policy = options.refusal_policy_path.empty()
                                      ? hygiene::RefusalPolicy::builtin()
                                      : hygiene::RefusalPolicy::load(options.refusal_policy_path);

  io::AnalysisConfig config;
  config.threshold = options.threshold;
  config.normalize_nfc = nfc;
  config.refusal_policy_path = options.refusal_policy_path;
  config.index_paths = options.index_paths;
  config.rng_seed = options.rng_seed;

  AnalyzeStats stats;
  stats.config_digest = config.digest();
  stats.dropped_path = dropped_path_for(options.out_path);
  stats.manifest_path = manifest_path_for(options.out_path);
  if (options.sample_window > 0) stats.samples_path = samples_path_for(options.out_path);

  const std::string records_digest = file_sha256_hex(options.records_path);
  std::vector<io::TextRecord> records;
  std::vector<io::RecordIssue> issues;
  {
    io::RecordReader reader(options.records_path, options.strict_records);
    while (std::optional<io::TextRecord> r = reader.next()) records.push_back(std::move(*r));
    issues = reader.issues();
  }
  stats.input_records = records.size() + issues.size();
  for (const io::RecordIssue& issue : issues) {
    stats.error_messages.push_back("line " + std::to_string(issue.line) + ": " +
                                   issue.message);
  }

  // Reusable results from a previous interrupted run: same id, same config,
  // same (possibly normalized) input record.  Window sampling needs the full
  // reproduction array, which analyzed records do not carry, so resume falls
  // back to recomputing when sampling is on.
  std::unordered_map<std::string, io::AnalyzedRecord> previous;
  if (options.resume && options.sample_window == 0 && fs::exists(options.out_path)) {
    for (io::AnalyzedRecord& done : io::read_analyzed(options.out_path, /*strict=*/false)) {
      if (done.config_digest == stats.config_digest) {
        previous.emplace(done.record.record_id, std::move(done));
      }
    }
  }

  enum class Disposition { kAnalyze, kReuse, kRefusal, kError };
  std::vector<Disposition> dispositions(records.size(), Disposition::kAnalyze);
  std::vector<std::string> reasons(records.size());
  std::vector<std::optional<io::AnalyzedRecord>> results(records.size());
  std::vector<WorkItem> todo;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const io::TextRecord& r = records[i];
    if (!utf8::is_valid(r.text) || !utf8::is_valid(r.prompt)) {
      dispositions[i] = Disposition::kError;
      reasons[i] = "error: text or prompt is not valid UTF-8";
      continue;
    }
    hygiene::RefusalCheck check = hygiene::is_refusal(r.text, policy);
    if (check.refusal) {
      dispositions[i] = Disposition::kRefusal;
      reasons[i] = check.reason;
      continue;
    }
    WorkItem item;
    item.input_index = i;
    item.record = r;
    if (nfc) {
      item.record.text = norm::nfc(r.text);
      item.record.prompt = norm::nfc(r.prompt);
    }
    auto hit = previous.find(r.record_id);
    if (hit != previous.end() && hit->second.record == item.record) {
      dispositions[i] = Disposition::kReuse;
      results[i] = hit->second;
      continue;
    }
    todo.push_back(std::move(item));
  }

  // Parallel per-record analysis; each slot has exactly one writer.
  std::vector<std::optional<metrics::FixedWindowSample>> samples(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto analyze_one = [&](const WorkItem& item) {
    const io::TextRecord& r = item.record;
    metrics::MatchProfile profile = metrics::match_profile(group, r.text);
    metrics::ReproductionProfile repro =
        metrics::reproduction_profile(profile, r.text, r.prompt, options.threshold);

    io::AnalyzedRecord out;
    out.record = r;
    out.overlap_rate = repro.overlap_rate;
    out.max_reproduction_len = repro.reproduction.empty()
                                   ? 0
                                   : *std::max_element(repro.reproduction.begin(),
                                                       repro.reproduction.end());
    for (const metrics::ReproducedSnippet& s :
         metrics::extract_snippets(r.text, repro.reproduction, options.threshold)) {
      out.snippets.push_back({s.start, s.length});
    }
    out.config_digest = stats.config_digest;
    results[item.input_index] = std::move(out);

    if (options.sample_window > 0) {
      samples[item.input_index] = metrics::sample_fixed_windows(
          r.text, repro.reproduction, options.threshold, options.sample_window,
          mix_seed(options.rng_seed, r.record_id));
    }
  };

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        analyze_one(todo[i]);
      } catch (const std::exception& e) {
        dispositions[todo[i].input_index] = Disposition::kError;
        reasons[todo[i].input_index] = std::string("error: ") + e.what();
      }
      std::size_t finished = done.fetch_add(1) + 1;
      if (progress != nullptr && (finished % 200 == 0 || finished == todo.size())) {
        std::lock_guard<std::mutex> lock(progress_mu);
        *progress << "analyzed " << finished << "/" << todo.size() << " records\n";
      }
    }
  };

  std::size_t threads = options.workers == 0 ? 1 : options.workers;
  if (threads > todo.size()) threads = todo.size();
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Assemble outputs strictly in input order.
  std::ofstream out = open_out(options.out_path);
  std::ofstream dropped = open_out(stats.dropped_path);
  std::optional<std::ofstream> samples_out;
  if (options.sample_window > 0) samples_out = open_out(stats.samples_path);

  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (dispositions[i]) {
      case Disposition::kAnalyze:
      case Disposition::kReuse: {
        out << io::to_line(*results[i]) << '\n';
        ++stats.analyzed;
        if (dispositions[i] == Disposition::kReuse) ++stats.reused;
        if (samples_out && samples[i]) {
          Json line;
          line["record_id"] = records[i].record_id;
          line["window"] = options.sample_window;
          line["threshold"] = options.threshold;
          line["reproduced"] =
              samples[i]->reproduced ? snippet_json(*samples[i]->reproduced) : Json(nullptr);
          line["non_reproduced"] = samples[i]->non_reproduced
                                       ? snippet_json(*samples[i]->non_reproduced)
                                       : Json(nullptr);
          *samples_out << line.dump() << '\n';
        }
        break;
      }
      case Disposition::kRefusal:
      case Disposition::kError: {
        Json line;
        line["drop_reason"] = reasons[i];
        try {
          Json original = Json::parse(io::to_line(records[i]));
          for (auto& [key, value] : original.items()) line[key] = value;
        } catch (const std::exception&) {
          line["record_id"] = records[i].record_id;  // text not serializable
        }
        dropped << line.dump() << '\n';
        if (dispositions[i] == Disposition::kRefusal) {
          ++stats.refusals;
        } else {
          ++stats.record_errors;
          stats.error_messages.push_back("record " + records[i].record_id + ": " +
                                         reasons[i]);
        }
        break;
      }
    }
  }
  stats.record_errors += issues.size();

  finish_out(out, options.out_path);
  finish_out(dropped, stats.dropped_path);
  if (samples_out) finish_out(*samples_out, stats.samples_path);

  // Run manifest: configuration, input digests, counts.  Deliberately no
  // timestamps so reruns stay byte-identical.
  Json manifest;
  manifest["command"] = "analyze";
  manifest["tool_version"] = kToolVersion;
  manifest["config_digest"] = stats.config_digest;
  Json config_json;
  config_json["threshold"] = options.threshold;
  config_json["normalize_nfc"] = nfc;
  config_json["refusal_policy"] =
      options.refusal_policy_path.empty() ? "builtin" : options.refusal_policy_path;
  config_json["rng_seed"] = options.rng_seed;
  config_json["sample_window"] = options.sample_window;
  manifest["config"] = std::move(config_json);
  Json indexes = Json::array();
  for (std::size_t i = 0; i < options.index_paths.size(); ++i) {
    Json entry;
    entry["path"] = options.index_paths[i];
    entry["corpus_digest"] = digest::to_hex(group.members()[i].corpus_digest());
    entry["doc_count"] = group.members()[i].doc_count();
    indexes.push_back(std::move(entry));
  }
  manifest["inputs"] = Json{{"records", Json{{"path", options.records_path},
                                             {"sha256", records_digest},
                                             {"count", stats.input_records}}},
                            {"indexes", std::move(indexes)}};
  manifest["counts"] = Json{{"analyzed", stats.analyzed},
                            {"refusals", stats.refusals},
                            {"record_errors", stats.record_errors}};
  Json outputs;
  outputs["analyzed"] = options.out_path;
  outputs["dropped"] = stats.dropped_path;
  if (options.sample_window > 0) outputs["samples"] = stats.samples_path;
  manifest["outputs"] = std::move(outputs);
  write_manifest(stats.manifest_path, manifest);

  if (progress != nullptr) {
    *progress << "analyze: " << stats.analyzed << " analyzed (" << stats.reused
              << " reused), " << stats.refusals << " refusals, " << stats.record_errors
              << " record errors\n";
  }
  return stats;
}

ReportStats run_report(const ReportRunOptions& options) {
  ReportStats stats;
  const std::string input_digest = file_sha256_hex(options.analyzed_path);
  std::vector<io::AnalyzedRecord> records = io::read_analyzed(options.analyzed_path);
  stats.records = records.size();

  std::set<std::string> digests;
  for (const io::AnalyzedRecord& r : records) digests.insert(r.config_digest);
  if (digests.size() > 1) {
    std::string joined;
    for (const std::string& d : digests) {
      if (!joined.empty()) joined += ", ";
      joined += d.substr(0, 12);
    }
    throw std::runtime_error(
        "analyzed records carry mixed config digests (" + joined +
        "); results from different configurations are not comparable");
  }
  if (!digests.empty()) stats.config_digest = *digests.begin();

  agg::ReportOptions report_options;
  report_options.group_by = options.group_by;
  report_options.top_k_snippets = options.top_k_snippets;
  report_options.balance_over_tasks = options.balance_over_tasks;
  agg::ReportResult result = agg::emit_report(records, options.out_dir, report_options);
  stats.files = result.files;
  stats.warnings = result.warnings;

  Json manifest;
  manifest["command"] = "report";
  manifest["tool_version"] = kToolVersion;
  manifest["config_digest"] = stats.config_digest;
  manifest["inputs"] = Json{{"analyzed", Json{{"path", options.analyzed_path},
                                              {"sha256", input_digest},
                                              {"count", stats.records}}}};
  Json options_json;
  options_json["group_by"] = options.group_by;
  options_json["top_k_snippets"] = options.top_k_snippets;
  options_json["balance_over_tasks"] = options.balance_over_tasks;
  manifest["options"] = std::move(options_json);
  manifest["outputs"] = Json{{"summary", stats.files.summary_csv},
                             {"balanced", stats.files.balanced_csv},
                             {"curves", stats.files.curves_csv},
                             {"snippets", stats.files.snippets_jsonl}};
  manifest["warnings"] = stats.warnings;
  stats.manifest_path = (fs::path(options.out_dir) / "manifest.json").string();
  write_manifest(stats.manifest_path, manifest);
  return stats;
}

}  // namespace repro::pipe
