#include "repro/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "repro/corpus_index.hpp"
#include "repro/digest.hpp"
#include "repro/records.hpp"
#include "repro/unicode_norm.hpp"

namespace fs = std::filesystem;
using repro::io::AnalyzedRecord;
using repro::io::TextRecord;
using repro::pipe::AnalyzeOptions;
using repro::pipe::AnalyzeStats;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("repro_pipe_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A 100-character all-letters passage; the filler around it is digits, so
// corpus matches start and stop exactly at the passage boundary.
std::string planted_passage() {
  std::string passage;
  for (int i = 0; i < 100; ++i) passage += static_cast<char>('a' + (i * 11 + 3) % 26);
  return passage;
}

std::string planted_text() {
  std::string text;
  for (int i = 0; i < 100; ++i) text += static_cast<char>('0' + i % 10);
  return text + planted_passage();
}

// Builds the planted-copy index under dir and returns its path.
std::string build_planted_index(const fs::path& dir, bool nfc = false) {
  std::vector<repro::corpus::Document> docs = {
      {"planted", "PREFIX " + planted_passage() + " SUFFIX"}};
  repro::corpus::VectorDocumentSource source(std::move(docs));
  repro::corpus::IndexBuildOptions options;
  options.normalize_nfc = nfc;
  std::string path = (dir / "planted.idx").string();
  repro::corpus::build_index(source, path, options);
  return path;
}

TextRecord make_record(std::string id, std::string text) {
  TextRecord r;
  r.record_id = std::move(id);
  r.source = "demo-model";
  r.task = "writing_prompts";
  r.text_type = "creative";
  r.prompt = "UNRELATED PROMPT";
  r.text = std::move(text);
  return r;
}

AnalyzeOptions base_options(const fs::path& dir, const std::string& index_path) {
  AnalyzeOptions options;
  options.index_paths = {index_path};
  options.records_path = (dir / "records.jsonl").string();
  options.out_path = (dir / "analyzed.jsonl").string();
  options.threshold = 50;
  return options;
}

}  // namespace

TEST_CASE("analyze finds the planted copy with overlap rate one half") {
  fs::path dir = fresh_dir("planted");
  std::string index_path = build_planted_index(dir);

  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", planted_text())});

  AnalyzeOptions options = base_options(dir, index_path);
  AnalyzeStats stats = repro::pipe::run_analyze(options);
  CHECK(stats.input_records == 1);
  CHECK(stats.analyzed == 1);
  CHECK(stats.refusals == 0);
  CHECK(stats.record_errors == 0);
  CHECK(stats.config_digest.size() == 64);

  std::vector<AnalyzedRecord> analyzed = repro::io::read_analyzed(options.out_path);
  REQUIRE(analyzed.size() == 1);
  CHECK(analyzed[0].overlap_rate == 0.5);
  CHECK(analyzed[0].max_reproduction_len == 100);
  REQUIRE(analyzed[0].snippets.size() == 1);
  CHECK(analyzed[0].snippets[0].start == 100);
  CHECK(analyzed[0].snippets[0].length == 100);
  CHECK(analyzed[0].config_digest == stats.config_digest);

  // The dropped file exists and is empty; the manifest pins config and inputs.
  CHECK(slurp(stats.dropped_path).empty());
  nlohmann::json manifest = nlohmann::json::parse(slurp(stats.manifest_path));
  CHECK(manifest["config_digest"] == stats.config_digest);
  CHECK(manifest["counts"]["analyzed"] == 1);
  CHECK(manifest["config"]["threshold"] == 50);
  CHECK(manifest["inputs"]["records"]["count"] == 1);
  fs::remove_all(dir);
}

TEST_CASE("refusals land in the dropped file; all-refusal runs analyze nothing") {
  fs::path dir = fresh_dir("refusals");
  std::string index_path = build_planted_index(dir);

  repro::io::write_records(
      (dir / "records.jsonl").string(),
      {make_record("r1", "I'm sorry, but I cannot write that story for you."),
       make_record("r2", "too short")});

  AnalyzeOptions options = base_options(dir, index_path);
  AnalyzeStats stats = repro::pipe::run_analyze(options);
  CHECK(stats.analyzed == 0);
  CHECK(stats.refusals == 2);
  CHECK(slurp(options.out_path).empty());

  std::ifstream dropped(stats.dropped_path);
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(dropped, line);) {
    lines.push_back(nlohmann::json::parse(line));
  }
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["drop_reason"] == "prefix: I'm sorry, but");
  CHECK(lines[0]["record_id"] == "r1");
  CHECK(lines[0]["text"] == "I'm sorry, but I cannot write that story for you.");
  CHECK(lines[1]["drop_reason"] == "length < 20");
  fs::remove_all(dir);
}

TEST_CASE("analyze reruns are byte-identical, including the manifest") {
  fs::path dir = fresh_dir("rerun");
  std::string index_path = build_planted_index(dir);
  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", planted_text()),
                            make_record("r2", "A perfectly ordinary novel sentence "
                                              "that matches nothing in the corpus.")});

  AnalyzeOptions options = base_options(dir, index_path);
  options.rng_seed = 17;
  options.sample_window = 40;
  repro::pipe::run_analyze(options);
  std::string first_out = slurp(options.out_path);
  std::string first_manifest = slurp(repro::pipe::manifest_path_for(options.out_path));
  std::string first_samples = slurp(repro::pipe::samples_path_for(options.out_path));

  repro::pipe::run_analyze(options);
  CHECK(slurp(options.out_path) == first_out);
  CHECK(slurp(repro::pipe::manifest_path_for(options.out_path)) == first_manifest);
  CHECK(slurp(repro::pipe::samples_path_for(options.out_path)) == first_samples);

  // More workers may change scheduling but never the output bytes.
  AnalyzeOptions parallel = options;
  parallel.workers = 4;
  parallel.out_path = (dir / "analyzed_w4.jsonl").string();
  repro::pipe::run_analyze(parallel);
  CHECK(slurp(parallel.out_path) == first_out);
  fs::remove_all(dir);
}

TEST_CASE("resume reuses results for unchanged records and configs") {
  fs::path dir = fresh_dir("resume");
  std::string index_path = build_planted_index(dir);

  std::vector<TextRecord> records = {
      make_record("r1", planted_text()),
      make_record("r2", "A perfectly ordinary novel sentence that matches nothing.")};
  repro::io::write_records((dir / "records.jsonl").string(), records);

  AnalyzeOptions options = base_options(dir, index_path);
  repro::pipe::run_analyze(options);
  std::string fresh = slurp(options.out_path);

  AnalyzeOptions resume = options;
  resume.resume = true;
  AnalyzeStats stats = repro::pipe::run_analyze(resume);
  CHECK(stats.reused == 2);
  CHECK(slurp(options.out_path) == fresh);

  // Changing one record's text invalidates only that record.
  records[1].text = "A slightly different novel sentence that matches nothing at all.";
  repro::io::write_records((dir / "records.jsonl").string(), records);
  stats = repro::pipe::run_analyze(resume);
  CHECK(stats.reused == 1);
  CHECK(stats.analyzed == 2);

  // A different config digest disables reuse entirely.
  AnalyzeOptions other_threshold = resume;
  other_threshold.threshold = 60;
  stats = repro::pipe::run_analyze(other_threshold);
  CHECK(stats.reused == 0);
  fs::remove_all(dir);
}

TEST_CASE("lenient mode collects malformed lines; strict mode throws") {
  fs::path dir = fresh_dir("lenient");
  std::string index_path = build_planted_index(dir);

  {
    std::ofstream out((dir / "records.jsonl").string(), std::ios::binary);
    out << repro::io::to_line(make_record("r1", planted_text())) << "\n";
    out << "{ this is not json }\n";
    out << repro::io::to_line(make_record("r3", "Another perfectly ordinary sentence "
                                                "about nothing in particular."))
        << "\n";
  }

  AnalyzeOptions options = base_options(dir, index_path);
  AnalyzeStats stats = repro::pipe::run_analyze(options);
  CHECK(stats.input_records == 3);
  CHECK(stats.analyzed == 2);
  CHECK(stats.record_errors == 1);
  REQUIRE(stats.error_messages.size() == 1);
  CHECK(stats.error_messages[0].find("line 2") != std::string::npos);

  AnalyzeOptions strict = options;
  strict.strict_records = true;
  CHECK_THROWS_AS(repro::pipe::run_analyze(strict), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("window sampling writes a deterministic samples file") {
  fs::path dir = fresh_dir("samples");
  std::string index_path = build_planted_index(dir);
  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", planted_text())});

  AnalyzeOptions options = base_options(dir, index_path);
  options.rng_seed = 99;
  options.sample_window = 30;
  AnalyzeStats stats = repro::pipe::run_analyze(options);
  REQUIRE_FALSE(stats.samples_path.empty());

  std::ifstream in(stats.samples_path);
  std::string line;
  REQUIRE(std::getline(in, line));
  nlohmann::json sample = nlohmann::json::parse(line);
  CHECK(sample["record_id"] == "r1");
  CHECK(sample["window"] == 30);
  // The planted text has a 100-char reproduced block; with digits as the
  // only word-boundary-free filler the whole text is one "word", so the only
  // boundary is position 0 (below threshold): a non-reproduced window.
  CHECK(sample["non_reproduced"]["start"] == 0);
  CHECK(sample["non_reproduced"]["length"] == 30);
  CHECK(sample["reproduced"].is_null());
  fs::remove_all(dir);
}

TEST_CASE("nfc indexes normalize the analyzed copy of text and prompt") {
  fs::path dir = fresh_dir("nfc");
  std::vector<repro::corpus::Document> docs = {
      {"d1", "caf\xc3\xa9 latte with extra foam and a very long tail of words"}};
  repro::corpus::VectorDocumentSource source(std::move(docs));
  repro::corpus::IndexBuildOptions build;
  build.normalize_nfc = true;
  std::string index_path = (dir / "nfc.idx").string();
  repro::corpus::build_index(source, index_path, build);

  // The record text spells café with a combining accent (decomposed form).
  std::string decomposed = "cafe\xcc\x81 latte with extra foam and nothing else here";
  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", decomposed)});

  AnalyzeOptions options = base_options(dir, index_path);
  options.threshold = 10;
  repro::pipe::run_analyze(options);

  std::vector<AnalyzedRecord> analyzed = repro::io::read_analyzed(options.out_path);
  REQUIRE(analyzed.size() == 1);
  CHECK(analyzed[0].record.text == repro::norm::nfc(decomposed));
  CHECK(analyzed[0].record.text != decomposed);
  CHECK(analyzed[0].max_reproduction_len >= 25);  // "café latte with extra foam"
  fs::remove_all(dir);
}

TEST_CASE("mix_seed is deterministic and id-sensitive") {
  CHECK(repro::pipe::mix_seed(1, "r1") == repro::pipe::mix_seed(1, "r1"));
  CHECK(repro::pipe::mix_seed(1, "r1") != repro::pipe::mix_seed(2, "r1"));
  CHECK(repro::pipe::mix_seed(1, "r1") != repro::pipe::mix_seed(1, "r2"));
}

TEST_CASE("file_sha256_hex matches the in-memory digest") {
  fs::path dir = fresh_dir("sha");
  std::string path = (dir / "blob.bin").string();
  std::string content = "some minor payload\n";
  {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  CHECK(repro::pipe::file_sha256_hex(path) ==
        repro::digest::to_hex(repro::digest::sha256(content)));
  CHECK_THROWS_AS(repro::pipe::file_sha256_hex((dir / "absent").string()),
                  std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("run_report writes files plus manifest and rejects mixed digests") {
  fs::path dir = fresh_dir("report");
  std::string index_path = build_planted_index(dir);
  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", planted_text())});

  AnalyzeOptions options = base_options(dir, index_path);
  AnalyzeStats stats = repro::pipe::run_analyze(options);

  repro::pipe::ReportRunOptions report;
  report.analyzed_path = options.out_path;
  report.out_dir = (dir / "report").string();
  repro::pipe::ReportStats rstats = repro::pipe::run_report(report);
  CHECK(rstats.records == 1);
  CHECK(rstats.config_digest == stats.config_digest);
  CHECK(fs::exists(rstats.files.summary_csv));
  CHECK(fs::exists(rstats.manifest_path));
  nlohmann::json manifest = nlohmann::json::parse(slurp(rstats.manifest_path));
  CHECK(manifest["config_digest"] == stats.config_digest);
  CHECK(manifest["inputs"]["analyzed"]["count"] == 1);

  // Splice in a record with a different config digest: report must refuse.
  std::vector<AnalyzedRecord> analyzed = repro::io::read_analyzed(options.out_path);
  AnalyzedRecord alien = analyzed[0];
  alien.record.record_id = "r-alien";
  alien.config_digest = std::string(64, 'f');
  analyzed.push_back(alien);
  repro::io::write_analyzed(options.out_path, analyzed);
  CHECK_THROWS_WITH_AS(repro::pipe::run_report(report),
                       doctest::Contains("mixed config digests"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("the installed CLI honors the exit code contract") {
  const std::string cli = REPRO_CLI_PATH;
  REQUIRE(fs::exists(cli));
  fs::path dir = fresh_dir("cli");
  std::string index_path = build_planted_index(dir);

  auto run = [&](const std::string& args) {
    std::string command = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
    int status = std::system(command.c_str());
    return WEXITSTATUS(status);
  };

  // Usage errors: no subcommand, unknown flag.
  CHECK(run("") == 1);
  CHECK(run("analyze --frobnicate") == 1);

  // Input error: missing index file.
  repro::io::write_records((dir / "records.jsonl").string(),
                           {make_record("r1", planted_text())});
  CHECK(run("analyze --index " + (dir / "absent.idx").string() + " --records " +
            (dir / "records.jsonl").string() + " --out " + (dir / "out.jsonl").string()) ==
        2);

  // Success.
  CHECK(run("analyze --index " + index_path + " --records " +
            (dir / "records.jsonl").string() + " --out " + (dir / "out.jsonl").string()) ==
        0);

  // Partial record errors: every record is a refusal, nothing analyzed.
  repro::io::write_records((dir / "refusals.jsonl").string(),
                           {make_record("r1", "I'm sorry, but no.")});
  CHECK(run("analyze --index " + index_path + " --records " +
            (dir / "refusals.jsonl").string() + " --out " +
            (dir / "out2.jsonl").string()) == 3);

  // Report over the successful run.
  CHECK(run("report --records " + (dir / "out.jsonl").string() + " --out " +
            (dir / "report").string()) == 0);
  CHECK(fs::exists(dir / "report" / "summary.csv"));

  // Report with a bad group-by field is an input error.
  CHECK(run("report --records " + (dir / "out.jsonl").string() + " --out " +
            (dir / "report2").string() + " --group-by nonsense") == 2);
  fs::remove_all(dir);
}
