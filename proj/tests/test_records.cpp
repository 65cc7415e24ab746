#include "repro/records.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "repro/taxonomy.hpp"

using namespace repro;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("repro_records_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

io::TextRecord random_record(std::mt19937_64& rng, int i) {
  static const char* kTypes[] = {"creative", "expository", "argumentative"};
  io::TextRecord r;
  r.record_id = "rec-" + std::to_string(i);
  r.source = (rng() % 2) ? "human" : "test-model";
  r.task = "custom-task-" + std::to_string(rng() % 5);
  r.text_type = kTypes[rng() % 3];
  r.prompt = "prompt with unicode é中 and \"quotes\" #" + std::to_string(rng() % 100);
  r.text = "text body\nwith a newline and tab\t" + std::to_string(rng());
  if (rng() % 2) r.seed = static_cast<int64_t>(rng() % 1000);
  if (rng() % 2) r.temperature = 0.7;
  r.system_prompt_condition = (rng() % 3 == 0) ? "assistant" : "none";
  return r;
}

}  // namespace

TEST_CASE("text records round-trip through files field-identically") {
  TempDir tmp;
  std::mt19937_64 rng(99);
  std::vector<io::TextRecord> records;
  for (int i = 0; i < 100; ++i) records.push_back(random_record(rng, i));
  const std::string path = tmp.file("r.jsonl");
  io::write_records(path, records);
  auto loaded = io::read_records(path);
  CHECK(loaded == records);
}

TEST_CASE("analyzed records round-trip") {
  TempDir tmp;
  std::mt19937_64 rng(7);
  std::vector<io::AnalyzedRecord> records;
  for (int i = 0; i < 50; ++i) {
    io::AnalyzedRecord a;
    a.record = random_record(rng, i);
    a.refusal = (i % 7 == 0);
    if (a.refusal) a.refusal_reason = "length < 20";
    a.overlap_rate = static_cast<double>(rng() % 1000) / 1000.0;
    a.max_reproduction_len = rng() % 500;
    for (int s = 0; s < static_cast<int>(rng() % 3); ++s) {
      a.snippets.push_back({rng() % 100, 1 + rng() % 50});
    }
    a.config_digest = "0123abcd";
    records.push_back(std::move(a));
  }
  const std::string path = tmp.file("a.jsonl");
  io::write_analyzed(path, records);
  auto loaded = io::read_analyzed(path);
  CHECK(loaded == records);
}

TEST_CASE("empty file yields an empty stream") {
  TempDir tmp;
  write_file(tmp.file("e.jsonl"), "");
  CHECK(io::read_records(tmp.file("e.jsonl")).empty());
  CHECK(io::read_analyzed(tmp.file("e.jsonl")).empty());
}

TEST_CASE("missing required fields are reported with line numbers") {
  TempDir tmp;
  const std::string good =
      R"({"record_id":"a","source":"m","task":"t","text_type":"creative","prompt":"p","text":"x","system_prompt_condition":"none"})";
  const std::string missing_text =
      R"({"record_id":"b","source":"m","task":"t","text_type":"creative","prompt":"p"})";
  write_file(tmp.file("m.jsonl"), good + "\n" + missing_text + "\n");
  CHECK_THROWS_WITH_AS(io::read_records(tmp.file("m.jsonl")),
                       "line 2: missing required field text", std::runtime_error);

  // Lenient mode keeps the good line and reports the issue.
  io::RecordReader reader(tmp.file("m.jsonl"), /*strict=*/false);
  std::vector<io::TextRecord> kept;
  while (auto r = reader.next()) kept.push_back(*r);
  CHECK(kept.size() == 1);
  REQUIRE(reader.issues().size() == 1);
  CHECK(reader.issues()[0].line == 2);
  CHECK(reader.issues()[0].message.find("missing required field text") != std::string::npos);
}

TEST_CASE("malformed JSON, bad types, and duplicates are rejected") {
  TempDir tmp;
  const std::string good =
      R"({"record_id":"a","source":"m","task":"t","text_type":"creative","prompt":"p","text":"x"})";

  write_file(tmp.file("j.jsonl"), "{not json\n");
  CHECK_THROWS_WITH_AS(io::read_records(tmp.file("j.jsonl")), "line 1: malformed record",
                       std::runtime_error);

  write_file(tmp.file("t.jsonl"),
             R"({"record_id":"a","source":"m","task":"t","text_type":"creative","prompt":"p","text":"x","seed":"one"})"
             "\n");
  CHECK_THROWS_WITH_AS(io::read_records(tmp.file("t.jsonl")),
                       "line 1: field seed must be an integer", std::runtime_error);

  write_file(tmp.file("d.jsonl"), good + "\n" + good + "\n");
  CHECK_THROWS_WITH_AS(io::read_records(tmp.file("d.jsonl")),
                       "line 2: duplicate record_id \"a\"", std::runtime_error);

  write_file(tmp.file("tt.jsonl"),
             R"({"record_id":"a","source":"m","task":"t","text_type":"poetry","prompt":"p","text":"x"})"
             "\n");
  CHECK_THROWS_WITH_AS(io::read_records(tmp.file("tt.jsonl")),
                       "line 1: unknown text_type \"poetry\"", std::runtime_error);

  // Built-in task ids pin the text type.
  write_file(tmp.file("tm.jsonl"),
             R"({"record_id":"a","source":"m","task":"tutorial","text_type":"creative","prompt":"p","text":"x"})"
             "\n");
  CHECK_THROWS_AS(io::read_records(tmp.file("tm.jsonl")), std::runtime_error);

  CHECK_THROWS_AS(io::read_records(tmp.file("does_not_exist.jsonl")), std::runtime_error);
}

TEST_CASE("config digest changes with every field") {
  io::AnalysisConfig base;
  base.threshold = 50;
  base.normalize_nfc = false;
  base.refusal_policy_path = "";
  base.index_paths = {"a.idx"};
  base.rng_seed = 0;
  const std::string d0 = base.digest();
  CHECK(d0.size() == 64);
  CHECK(base.digest() == d0);  // stable

  std::set<std::string> seen{d0};
  auto expect_new = [&](io::AnalysisConfig c) {
    const std::string d = c.digest();
    CHECK_FALSE(seen.count(d));
    seen.insert(d);
  };
  io::AnalysisConfig c = base;
  c.threshold = 51;
  expect_new(c);
  c = base;
  c.normalize_nfc = true;
  expect_new(c);
  c = base;
  c.refusal_policy_path = "p.txt";
  expect_new(c);
  c = base;
  c.index_paths = {"a.idx", "b.idx"};
  expect_new(c);
  c = base;
  c.index_paths = {"a.idxb", ".idx"};  // same concatenation, different split
  expect_new(c);
  c = base;
  c.rng_seed = 1;
  expect_new(c);
}

TEST_CASE("builtin taxonomy: 15 tasks, 3 text types, usable templates") {
  const auto& tax = io::builtin_taxonomy();
  CHECK(tax.size() == 15);
  std::set<std::string> types;
  std::set<std::string> ids;
  for (const auto& t : tax) {
    types.insert(t.text_type);
    CHECK(ids.insert(t.id).second);  // ids unique
    const std::string prompt = io::instantiate_template(t, "black holes");
    CHECK_FALSE(prompt.empty());
    CHECK(prompt.find("{topic}") == std::string::npos);
    CHECK(prompt.find("black holes") != std::string::npos);
  }
  CHECK(types == std::set<std::string>{"argumentative", "creative", "expository"});

  auto enc = io::find_task("encyclopedia");
  REQUIRE(enc.has_value());
  CHECK(enc->text_type == "expository");
  CHECK(io::instantiate_template(*enc, "evolution") ==
        "Write an encyclopedia article about evolution.");
  CHECK_FALSE(io::find_task("no-such-task").has_value());
  CHECK_THROWS_AS(io::instantiate_template(*enc, ""), std::invalid_argument);

  // Counts per text type match the documented grid: 5 + 5 + 5.
  int creative = 0, expository = 0, argumentative = 0;
  for (const auto& t : tax) {
    if (t.text_type == "creative") ++creative;
    if (t.text_type == "expository") ++expository;
    if (t.text_type == "argumentative") ++argumentative;
  }
  CHECK(creative == 5);
  CHECK(expository == 5);
  CHECK(argumentative == 5);
}

TEST_CASE("shipped taxonomy file matches the builtin list") {
  auto from_file = io::load_taxonomy(std::string(REPRO_REPO_DATA_DIR) + "/taxonomy.json");
  CHECK(from_file == io::builtin_taxonomy());
}
