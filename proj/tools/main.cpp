#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "repro/corpus_index.hpp"
#include "repro/digest.hpp"
#include "repro/generation.hpp"
#include "repro/pipeline.hpp"
#include "repro/records.hpp"
#include "repro/taxonomy.hpp"

namespace {

using Json = nlohmann::ordered_json;

// Exit code contract shared by every subcommand: 0 success, 1 usage,
// 2 input error, 3 completed with record-level errors.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitRecordErrors = 3;

struct IndexBuildArgs {
  std::string input;
  std::string out;
  bool nfc = false;
  bool lenient = false;
  uint64_t shard_bytes = 256ull << 20;
};

struct IndexVerifyArgs {
  std::vector<std::string> indexes;
};

struct GenerateArgs {
  std::string endpoint;
  std::string credential_env;
  std::string model;
  std::string prompts_path;
  std::string out;
  std::string condition = "none";
  std::string metadata_path;
  std::vector<int64_t> seeds = {1, 2, 3, 4, 5};
  double temperature = 0.7;
  bool no_seed_support = false;
  double rpm = 30;
  int max_attempts = 4;
  std::size_t workers = 1;
};

struct AnalyzeArgs {
  std::vector<std::string> indexes;
  std::string records;
  std::string out;
  uint32_t threshold = 50;
  std::string refusal_policy;
  uint64_t seed = 0;
  std::size_t workers = 1;
  bool resume = false;
  bool strict = false;
  std::size_t sample_window = 0;
};

struct ReportArgs {
  std::string records;
  std::string out_dir;
  std::vector<std::string> group_by = {"source", "text_type", "task"};
  std::size_t top_k = 5;
  bool no_task_balance = false;
};

void write_manifest(const std::string& path, const Json& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << manifest.dump(2) << '\n';
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

int run_index_build(const IndexBuildArgs& args) {
  namespace fs = std::filesystem;
  repro::corpus::IndexBuildOptions options;
  options.normalize_nfc = args.nfc;
  options.strict = !args.lenient;
  options.target_shard_bytes = args.shard_bytes;

  std::unique_ptr<repro::corpus::DocumentSource> source;
  std::string kind;
  if (fs::is_directory(args.input)) {
    source = std::make_unique<repro::corpus::DirectoryDocumentSource>(args.input);
    kind = "directory";
  } else if (fs::is_regular_file(args.input)) {
    source = std::make_unique<repro::corpus::JsonlDocumentSource>(args.input);
    kind = "jsonl";
  } else {
    std::cerr << "error: input not found: " << args.input << "\n";
    return kExitInput;
  }

  repro::corpus::BuildResult result =
      repro::corpus::build_index(*source, args.out, options);

  Json manifest;
  manifest["command"] = "index build";
  manifest["tool_version"] = repro::pipe::kToolVersion;
  manifest["inputs"] = Json{{"source", args.input}, {"kind", kind}};
  manifest["options"] = Json{{"normalize_nfc", args.nfc},
                             {"strict", !args.lenient},
                             {"target_shard_bytes", args.shard_bytes}};
  Json skipped = Json::array();
  for (const repro::corpus::DocumentIssue& issue : result.skipped) {
    skipped.push_back(Json{{"doc_id", issue.doc_id}, {"message", issue.message}});
  }
  manifest["result"] = Json{{"corpus_digest", repro::digest::to_hex(result.corpus_digest)},
                            {"doc_count", result.doc_count},
                            {"total_chars", result.total_chars},
                            {"shard_count", result.shard_count},
                            {"index_file_bytes", result.index_file_bytes},
                            {"skipped", std::move(skipped)}};
  manifest["outputs"] = Json{{"index", args.out}};
  write_manifest(args.out + ".manifest.json", manifest);

  std::cerr << "indexed " << result.doc_count << " documents (" << result.total_chars
            << " chars, " << result.shard_count << " shard(s), "
            << result.index_file_bytes << " bytes on disk)\n";
  for (const repro::corpus::DocumentIssue& issue : result.skipped) {
    std::cerr << "skipped " << issue.doc_id << ": " << issue.message << "\n";
  }
  return result.skipped.empty() ? kExitOk : kExitRecordErrors;
}

int run_index_verify(const IndexVerifyArgs& args) {
  bool all_ok = true;
  for (const std::string& path : args.indexes) {
    try {
      repro::corpus::VerifyInfo info = repro::corpus::CorpusIndex::verify_file(path);
      std::cout << path << ": ok, digest " << repro::digest::to_hex(info.corpus_digest)
                << ", " << info.doc_count << " docs, " << info.total_chars << " chars, "
                << info.shard_count << " shard(s), nfc="
                << (info.normalize_nfc ? "true" : "false") << "\n";
    } catch (const std::exception& e) {
      std::cerr << path << ": FAILED: " << e.what() << "\n";
      all_ok = false;
    }
  }
  return all_ok ? kExitOk : kExitInput;
}

// Prompt lines carry either a ready-made prompt or a topic to splice into
// the task's template: {"task", "text_type", "prompt"} or {"task", "topic"}.
std::vector<repro::gen::PromptSpec> read_prompts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prompts file: " + path);
  std::vector<repro::gen::PromptSpec> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json parsed;
    try {
      parsed = Json::parse(line);
    } catch (const Json::exception& e) {
      throw std::runtime_error("prompts line " + std::to_string(line_no) + ": " + e.what());
    }
    repro::gen::PromptSpec spec;
    spec.task = parsed.value("task", "");
    if (spec.task.empty()) {
      throw std::runtime_error("prompts line " + std::to_string(line_no) +
                               ": missing task");
    }
    std::optional<repro::io::TaskInfo> info = repro::io::find_task(spec.task);
    if (parsed.contains("prompt")) {
      spec.prompt = parsed["prompt"].get<std::string>();
      spec.text_type = parsed.value("text_type", info ? info->text_type : "");
    } else if (parsed.contains("topic")) {
      if (!info) {
        throw std::runtime_error("prompts line " + std::to_string(line_no) + ": task " +
                                 spec.task + " is not in the built-in taxonomy, so " +
                                 "\"topic\" cannot be expanded; provide \"prompt\"");
      }
      spec.prompt =
          repro::io::instantiate_template(*info, parsed["topic"].get<std::string>());
      spec.text_type = info->text_type;
    } else {
      throw std::runtime_error("prompts line " + std::to_string(line_no) +
                               ": need either \"prompt\" or \"topic\"");
    }
    if (spec.text_type.empty()) {
      throw std::runtime_error("prompts line " + std::to_string(line_no) +
                               ": missing text_type for free-form task");
    }
    prompts.push_back(std::move(spec));
  }
  return prompts;
}

int run_generate(const GenerateArgs& args) {
  repro::gen::GenerationJob job;
  job.endpoint = args.endpoint;
  job.credential_env_var = args.credential_env;
  job.model = args.model;
  job.prompts = read_prompts(args.prompts_path);
  job.temperature = args.temperature;
  job.seeds = args.seeds;
  job.seed_supported = !args.no_seed_support;
  job.system_prompt_condition = args.condition;
  job.requests_per_minute = args.rpm;
  job.retry.max_attempts = args.max_attempts;
  job.max_in_flight = args.workers;

  if (args.condition == "assistant") {
    if (args.metadata_path.empty()) {
      std::cerr << "error: --condition assistant requires --metadata\n";
      return kExitInput;
    }
    job.system_prompt = repro::gen::mitigation_prompt(
        "assistant", repro::gen::assistant_metadata_for(args.metadata_path, args.model));
  } else {
    job.system_prompt = repro::gen::mitigation_prompt(args.condition);
  }

  if (job.prompts.empty()) {
    std::cerr << "error: prompts file is empty: " << args.prompts_path << "\n";
    return kExitInput;
  }

  repro::gen::RunResult result = repro::gen::run_job(job);

  std::vector<repro::io::TextRecord> records;
  std::vector<std::string> refused_ids;
  for (const repro::gen::GeneratedRecord& r : result.records) {
    records.push_back(r.record);
    if (r.api_refused) refused_ids.push_back(r.record.record_id);
  }
  repro::io::write_records(args.out, records);

  const std::string failures_path = args.out + ".failures.jsonl";
  repro::gen::write_failures(failures_path, result.failures);

  std::string refused_path;
  if (!refused_ids.empty()) {
    refused_path = args.out + ".api_refused.txt";
    std::ofstream refused(refused_path, std::ios::binary | std::ios::trunc);
    for (const std::string& id : refused_ids) refused << id << '\n';
  }

  Json manifest;
  manifest["command"] = "generate";
  manifest["tool_version"] = repro::pipe::kToolVersion;
  manifest["job"] = Json{{"endpoint", args.endpoint},
                         {"model", args.model},
                         {"condition", args.condition},
                         {"temperature", args.temperature},
                         {"seeds", args.seeds},
                         {"seed_supported", !args.no_seed_support},
                         {"credential_env_var", args.credential_env}};
  manifest["inputs"] =
      Json{{"prompts", Json{{"path", args.prompts_path},
                            {"sha256", repro::pipe::file_sha256_hex(args.prompts_path)},
                            {"count", job.prompts.size()}}}};
  manifest["counts"] = Json{{"records", records.size()},
                            {"api_refused", refused_ids.size()},
                            {"failures", result.failures.size()},
                            {"requests_sent", result.requests_sent}};
  Json outputs;
  outputs["records"] = args.out;
  outputs["failures"] = failures_path;
  if (!refused_path.empty()) outputs["api_refused"] = refused_path;
  manifest["outputs"] = std::move(outputs);
  write_manifest(args.out + ".manifest.json", manifest);

  std::cerr << "generated " << records.size() << " records ("
            << refused_ids.size() << " API-refused), " << result.failures.size()
            << " failures\n";
  return result.failures.empty() ? kExitOk : kExitRecordErrors;
}

int run_analyze(const AnalyzeArgs& args) {
  repro::pipe::AnalyzeOptions options;
  options.index_paths = args.indexes;
  options.records_path = args.records;
  options.out_path = args.out;
  options.threshold = args.threshold;
  options.refusal_policy_path = args.refusal_policy;
  options.rng_seed = args.seed;
  options.workers = args.workers;
  options.resume = args.resume;
  options.strict_records = args.strict;
  options.sample_window = args.sample_window;

  repro::pipe::AnalyzeStats stats = repro::pipe::run_analyze(options, &std::cerr);
  for (const std::string& message : stats.error_messages) {
    std::cerr << "record error: " << message << "\n";
  }
  if (stats.analyzed == 0) {
    std::cerr << "warning: nothing analyzed (" << stats.refusals << " refusals, "
              << stats.record_errors << " record errors)\n";
    return kExitRecordErrors;
  }
  return stats.record_errors == 0 ? kExitOk : kExitRecordErrors;
}

int run_report(const ReportArgs& args) {
  repro::pipe::ReportRunOptions options;
  options.analyzed_path = args.records;
  options.out_dir = args.out_dir;
  options.group_by = args.group_by;
  options.top_k_snippets = args.top_k;
  options.balance_over_tasks = !args.no_task_balance;

  repro::pipe::ReportStats stats = repro::pipe::run_report(options);
  for (const std::string& warning : stats.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  std::cerr << "report over " << stats.records << " analyzed records written to "
            << args.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure verbatim reproduction of text against a reference corpus"};
  app.set_version_flag("--version", repro::pipe::kToolVersion);
  app.require_subcommand(1);

  // index build / index verify
  CLI::App* index = app.add_subcommand("index", "Build or check corpus indexes");
  index->require_subcommand(1);

  IndexBuildArgs build_args;
  CLI::App* index_build = index->add_subcommand("build", "Index a corpus for matching");
  index_build->add_option("--input", build_args.input,
                          "Corpus: a JSONL file of {doc_id, content} or a directory of "
                          "text files")
      ->required();
  index_build->add_option("--out", build_args.out, "Index file to write")->required();
  index_build->add_flag("--nfc", build_args.nfc, "NFC-normalize documents before indexing");
  index_build->add_flag("--lenient", build_args.lenient,
                        "Skip unreadable documents instead of aborting");
  index_build->add_option("--shard-bytes", build_args.shard_bytes,
                          "Target shard size in bytes");

  IndexVerifyArgs verify_args;
  CLI::App* index_verify = index->add_subcommand("verify", "Check index file integrity");
  index_verify->add_option("--index", verify_args.indexes, "Index file (repeatable)")
      ->required();

  // generate
  GenerateArgs generate_args;
  CLI::App* generate = app.add_subcommand(
      "generate", "Produce records by querying a chat-completion endpoint");
  generate->add_option("--endpoint", generate_args.endpoint, "Base URL of the service")
      ->required();
  generate->add_option("--credential-env", generate_args.credential_env,
                       "Name of the environment variable holding the API key");
  generate->add_option("--model", generate_args.model, "Model name")->required();
  generate->add_option("--prompts", generate_args.prompts_path,
                       "JSONL of {task, text_type, prompt} or {task, topic}")
      ->required();
  generate->add_option("--out", generate_args.out, "Records file to write")->required();
  generate->add_option("--condition", generate_args.condition,
                       "System prompt condition: none, specific, or assistant");
  generate->add_option("--metadata", generate_args.metadata_path,
                       "Assistant metadata JSON (required for --condition assistant)");
  generate->add_option("--seeds", generate_args.seeds, "Seeds, e.g. --seeds 1,2,3")
      ->delimiter(',');
  generate->add_option("--temperature", generate_args.temperature, "Sampling temperature");
  generate->add_flag("--no-seed-support", generate_args.no_seed_support,
                     "Provider ignores seeds; omit them from requests and records");
  generate->add_option("--rpm", generate_args.rpm, "Client-side requests per minute");
  generate->add_option("--max-attempts", generate_args.max_attempts,
                       "Attempts per request before it is a failure");
  generate->add_option("--workers", generate_args.workers, "Concurrent in-flight requests");

  // analyze
  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Compute reproduction metrics for records against indexes");
  analyze->add_option("--index", analyze_args.indexes, "Index file (repeatable)")
      ->required();
  analyze->add_option("--records", analyze_args.records, "Input records JSONL")
      ->required();
  analyze->add_option("--out", analyze_args.out, "Analyzed records JSONL to write")
      ->required();
  analyze->add_option("--threshold", analyze_args.threshold,
                      "Reproduction length cutoff in characters");
  analyze->add_option("--refusal-policy", analyze_args.refusal_policy,
                      "Refusal policy file (default: built-in)");
  analyze->add_option("--seed", analyze_args.seed, "Seed for all sampling randomness");
  analyze->add_option("--workers", analyze_args.workers,
                      "Parallel analysis threads (output order is input order)");
  analyze->add_flag("--resume", analyze_args.resume,
                    "Reuse per-record results already in --out for this config");
  analyze->add_flag("--strict", analyze_args.strict,
                    "Abort on the first malformed record instead of collecting errors");
  analyze->add_option("--sample-window", analyze_args.sample_window,
                      "Also sample one reproduced / non-reproduced window of this "
                      "many characters per record");

  // report
  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Aggregate analyzed records");
  report->add_option("--records", report_args.records, "Analyzed records JSONL")
      ->required();
  report->add_option("--out", report_args.out_dir, "Output directory")->required();
  report->add_option("--group-by", report_args.group_by,
                     "Grouping fields: source, text_type, task, condition")
      ->delimiter(',');
  report->add_option("--top-k", report_args.top_k, "Longest snippets kept per group");
  report->add_flag("--no-task-balance", report_args.no_task_balance,
                   "Balance text-type means over records instead of task means");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (index_build->parsed()) return run_index_build(build_args);
    if (index_verify->parsed()) return run_index_verify(verify_args);
    if (generate->parsed()) return run_generate(generate_args);
    if (analyze->parsed()) return run_analyze(analyze_args);
    if (report->parsed()) return run_report(report_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
