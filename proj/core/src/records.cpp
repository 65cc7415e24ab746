#include "repro/records.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <unordered_set>

#include "repro/digest.hpp"
#include "repro/taxonomy.hpp"

namespace repro::io {
namespace {

// Ordered JSON keeps the documented field order in output lines, which in
// turn keeps rewritten files byte-stable.
using Json = nlohmann::ordered_json;

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

const Json& require_field(const Json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end()) bad_line(line, std::string("missing required field ") + name);
  return *it;
}

std::string require_string(const Json& j, const char* name, std::size_t line) {
  const Json& v = require_field(j, name, line);
  if (!v.is_string()) bad_line(line, std::string("field ") + name + " must be a string");
  return v.get<std::string>();
}

void validate_text_type(const TextRecord& r, std::size_t line) {
  if (r.text_type != "creative" && r.text_type != "expository" &&
      r.text_type != "argumentative") {
    bad_line(line, "unknown text_type \"" + r.text_type + "\"");
  }
  if (auto task = find_task(r.task); task && task->text_type != r.text_type) {
    bad_line(line, "text_type \"" + r.text_type + "\" does not match task \"" + r.task +
                       "\" (expects " + task->text_type + ")");
  }
}

TextRecord record_from_json(const Json& j, std::size_t line) {
  TextRecord r;
  r.record_id = require_string(j, "record_id", line);
  if (r.record_id.empty()) bad_line(line, "record_id must not be empty");
  r.source = require_string(j, "source", line);
  r.task = require_string(j, "task", line);
  r.text_type = require_string(j, "text_type", line);
  r.prompt = require_string(j, "prompt", line);
  r.text = require_string(j, "text", line);
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) bad_line(line, "field seed must be an integer");
    r.seed = it->get<int64_t>();
  }
  if (auto it = j.find("temperature"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) bad_line(line, "field temperature must be a number");
    r.temperature = it->get<double>();
  }
  if (auto it = j.find("system_prompt_condition"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) bad_line(line, "field system_prompt_condition must be a string");
    r.system_prompt_condition = it->get<std::string>();
  }
  validate_text_type(r, line);
  return r;
}

Json record_to_json(const TextRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["source"] = r.source;
  j["task"] = r.task;
  j["text_type"] = r.text_type;
  j["prompt"] = r.prompt;
  j["text"] = r.text;
  if (r.seed) j["seed"] = *r.seed;
  if (r.temperature) j["temperature"] = *r.temperature;
  j["system_prompt_condition"] = r.system_prompt_condition;
  return j;
}

AnalyzedRecord analyzed_from_json(const Json& j, std::size_t line) {
  AnalyzedRecord a;
  a.record = record_from_json(j, line);
  const Json& refusal = require_field(j, "refusal", line);
  if (!refusal.is_boolean()) bad_line(line, "field refusal must be a boolean");
  a.refusal = refusal.get<bool>();
  if (auto it = j.find("refusal_reason"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) bad_line(line, "field refusal_reason must be a string");
    a.refusal_reason = it->get<std::string>();
  }
  const Json& rate = require_field(j, "overlap_rate", line);
  if (!rate.is_number()) bad_line(line, "field overlap_rate must be a number");
  a.overlap_rate = rate.get<double>();
  if (!(a.overlap_rate >= 0.0 && a.overlap_rate <= 1.0)) {
    bad_line(line, "overlap_rate out of range [0, 1]");
  }
  const Json& maxlen = require_field(j, "max_reproduction_len", line);
  if (!maxlen.is_number_unsigned() && !(maxlen.is_number_integer() && maxlen.get<int64_t>() >= 0)) {
    bad_line(line, "field max_reproduction_len must be a non-negative integer");
  }
  a.max_reproduction_len = maxlen.get<uint64_t>();
  const Json& snippets = require_field(j, "snippets", line);
  if (!snippets.is_array()) bad_line(line, "field snippets must be an array");
  for (const auto& s : snippets) {
    if (!s.is_object() || !s.contains("start") || !s.contains("length") ||
        !s["start"].is_number_unsigned() || !s["length"].is_number_unsigned()) {
      bad_line(line, "snippet entries must carry unsigned start and length");
    }
    a.snippets.push_back({s["start"].get<uint64_t>(), s["length"].get<uint64_t>()});
  }
  a.config_digest = require_string(j, "config_digest", line);
  return a;
}

Json analyzed_to_json(const AnalyzedRecord& a) {
  Json j = record_to_json(a.record);
  j["refusal"] = a.refusal;
  if (!a.refusal_reason.empty()) j["refusal_reason"] = a.refusal_reason;
  j["overlap_rate"] = a.overlap_rate;
  j["max_reproduction_len"] = a.max_reproduction_len;
  Json spans = Json::array();
  for (const SnippetSpan& s : a.snippets) {
    spans.push_back(Json{{"start", s.start}, {"length", s.length}});
  }
  j["snippets"] = std::move(spans);
  j["config_digest"] = a.config_digest;
  return j;
}

template <typename T>
void write_lines(const std::string& path, const std::vector<T>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) {
    throw std::runtime_error("cannot open records file for writing: " + path);
  }
  std::unordered_set<std::string> seen;
  for (const T& item : items) {
    const std::string& id = [&]() -> const std::string& {
      if constexpr (std::is_same_v<T, TextRecord>) return item.record_id;
      else return item.record.record_id;
    }();
    if (!seen.insert(id).second) {
      throw std::runtime_error("duplicate record_id \"" + id + "\"");
    }
    out << to_line(item) << '\n';
  }
  out.flush();
  if (!out.good()) {
    throw std::runtime_error("failed writing records file: " + path);
  }
}

}  // namespace

std::string AnalysisConfig::digest() const {
  // Canonical framing: every field contributes, including its length, so no
  // two distinct configs collide by concatenation.
  digest::Sha256Stream h;
  h.update_u64(threshold);
  h.update_u64(normalize_nfc ? 1 : 0);
  h.update_u64(refusal_policy_path.size());
  h.update(refusal_policy_path);
  h.update_u64(index_paths.size());
  for (const std::string& p : index_paths) {
    h.update_u64(p.size());
    h.update(p);
  }
  h.update_u64(rng_seed);
  return digest::to_hex(h.finish());
}

struct RecordReader::Impl {
  std::ifstream in;
  std::string path;
  bool strict = true;
  std::size_t line_no = 0;
  std::vector<RecordIssue> issues;
  std::unordered_set<std::string> seen_ids;
};

RecordReader::RecordReader(const std::string& path, bool strict) : impl_(new Impl) {
  impl_->in.open(path, std::ios::binary);
  impl_->path = path;
  impl_->strict = strict;
  if (!impl_->in.is_open()) {
    throw std::runtime_error("cannot open records file: " + path);
  }
}

RecordReader::~RecordReader() = default;
RecordReader::RecordReader(RecordReader&&) noexcept = default;
RecordReader& RecordReader::operator=(RecordReader&&) noexcept = default;

std::optional<TextRecord> RecordReader::next() {
  std::string line;
  while (std::getline(impl_->in, line)) {
    ++impl_->line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line, nullptr, true);
      TextRecord r = record_from_json(j, impl_->line_no);
      if (!impl_->seen_ids.insert(r.record_id).second) {
        bad_line(impl_->line_no, "duplicate record_id \"" + r.record_id + "\"");
      }
      return r;
    } catch (const Json::parse_error&) {
      const std::string msg =
          "line " + std::to_string(impl_->line_no) + ": malformed record";
      if (impl_->strict) throw std::runtime_error(msg);
      impl_->issues.push_back({impl_->line_no, msg, line});
    } catch (const std::runtime_error& e) {
      if (impl_->strict) throw;
      impl_->issues.push_back({impl_->line_no, e.what(), line});
    }
  }
  return std::nullopt;
}

const std::vector<RecordIssue>& RecordReader::issues() const { return impl_->issues; }

std::vector<TextRecord> read_records(const std::string& path, bool strict) {
  RecordReader reader(path, strict);
  std::vector<TextRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

void write_records(const std::string& path, const std::vector<TextRecord>& records) {
  write_lines(path, records);
}

std::vector<AnalyzedRecord> read_analyzed(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw std::runtime_error("cannot open records file: " + path);
  }
  std::vector<AnalyzedRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line, nullptr, true);
      AnalyzedRecord a = analyzed_from_json(j, line_no);
      if (!seen.insert(a.record.record_id).second) {
        bad_line(line_no, "duplicate record_id \"" + a.record.record_id + "\"");
      }
      out.push_back(std::move(a));
    } catch (const Json::parse_error&) {
      if (strict) bad_line(line_no, "malformed record");
    } catch (const std::runtime_error&) {
      if (strict) throw;
    }
  }
  return out;
}

void write_analyzed(const std::string& path, const std::vector<AnalyzedRecord>& records) {
  write_lines(path, records);
}

std::string to_line(const TextRecord& record) { return record_to_json(record).dump(); }

std::string to_line(const AnalyzedRecord& record) { return analyzed_to_json(record).dump(); }

}  // namespace repro::io
