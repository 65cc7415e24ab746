#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repro/records.hpp"

namespace repro::gen {

// Placeholder values for the assistant-style system prompt.
struct AssistantMetadata {
  std::string assistant;  // e.g. "GPT"
  std::string company;    // e.g. "OpenAI"
  std::string cutoff;     // e.g. "October 2023"
  std::string date;       // conversation date, e.g. "September 1st, 2024"
};

// Returns the system prompt for a mitigation condition: "none" -> empty,
// "specific" -> the originality instruction, "assistant" -> the long
// assistant template with {assistant}/{company}/{cutoff}/{date} filled in.
// Unknown conditions or missing metadata fields throw std::invalid_argument
// (the latter lists the unfilled placeholders).
std::string mitigation_prompt(const std::string& condition,
                              const AssistantMetadata& metadata = {});

// Looks `model` up in the shipped placeholder table (a JSON file with
// default_date and a models array); throws if the model has no entry.
AssistantMetadata assistant_metadata_for(const std::string& path, const std::string& model);

// One user message to send, with the provenance the resulting record needs.
struct PromptSpec {
  std::string task;       // taxonomy id or free-form label
  std::string text_type;  // creative / expository / argumentative
  std::string prompt;     // full user-message text
};

struct RetryPolicy {
  int max_attempts = 4;
  int initial_backoff_ms = 250;   // doubles per attempt
  int max_backoff_ms = 5000;
};

struct GenerationJob {
  std::string endpoint;            // base URL, e.g. "http://127.0.0.1:8080"
  std::string credential_env_var;  // variable NAME; empty = no auth header
  std::string model;
  std::vector<PromptSpec> prompts;
  double temperature = 0.7;
  std::vector<int64_t> seeds = {1, 2, 3, 4, 5};
  bool seed_supported = true;      // false: seed omitted from requests and records
  std::string system_prompt_condition = "none";
  std::string system_prompt;       // resolved text; must be empty for "none"
  double requests_per_minute = 30; // client-side pacing; <= 0 disables
  RetryPolicy retry;
  std::size_t max_in_flight = 1;   // bounded concurrent requests
  int request_timeout_seconds = 120;
};

// A (prompt, seed) pair that exhausted its retries or was rejected outright.
struct Failure {
  std::size_t prompt_index = 0;
  int64_t seed = 0;
  std::string task;
  std::string prompt;
  std::string error;
};

struct GeneratedRecord {
  io::TextRecord record;
  bool api_refused = false;        // provider content filter fired
  std::string finish_reason;
};

struct RunResult {
  std::vector<GeneratedRecord> records;  // deterministic (prompt, seed) order
  std::vector<Failure> failures;         // same ordering; never silently dropped
  std::size_t requests_sent = 0;         // including retries
};

// Sends one chat-completion request per (prompt, seed) and collects the
// results in (prompt, seed) order regardless of completion order.  An
// authentication failure aborts the whole job with std::runtime_error.
RunResult run_job(const GenerationJob& job);

// Writes failures as one JSON object per line (prompt included so the items
// can be replayed).
void write_failures(const std::string& path, const std::vector<Failure>& failures);

}  // namespace repro::gen
