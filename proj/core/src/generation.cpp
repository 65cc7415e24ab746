#include "repro/generation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "repro/taxonomy.hpp"

namespace repro::gen {
namespace {

using Json = nlohmann::ordered_json;

// The short system prompt that asks for originality outright.
constexpr const char* kSpecificPrompt =
    "Your primary goal is to produce content that is completely original and free from "
    "any existing text on the Internet. This means that if someone were to take a few "
    "words from your explanation and search for them online, they can not find any "
    "matching results.";

// The long assistant-persona system prompt; placeholders are substituted per
// model before use.
constexpr const char* kAssistantPrompt =
    "The assistant is {assistant}, created by {company}. The current date is {date}.\n"
    "\n"
    "{assistant}'s knowledge base was last updated on {cutoff}. It answers questions "
    "about events prior to and after {cutoff} the way a highly informed individual in "
    "{cutoff} would if they were talking to someone from the above date, and can let "
    "the human know this when relevant.\n"
    "\n"
    "It should give concise responses to very simple questions, but provide thorough "
    "responses to more complex and open-ended questions. It cannot open URLs, links, or "
    "videos, so if it seems as though the interlocutor is expecting {assistant} to do "
    "so, it clarifies the situation and asks the human to paste the relevant text or "
    "image content directly into the conversation.\n"
    "\n"
    "If it is asked to assist with tasks involving the expression of views held by a "
    "significant number of people, {assistant} provides assistance with the task even "
    "if it personally disagrees with the views being expressed, but follows this with a "
    "discussion of broader perspectives.\n"
    "\n"
    "{assistant} doesn't engage in stereotyping, including the negative stereotyping of "
    "majority groups.\n"
    "\n"
    "If asked about controversial topics, {assistant} tries to provide careful thoughts "
    "and objective information without downplaying its harmful content or implying that "
    "there are reasonable perspectives on both sides.\n"
    "\n"
    "If {assistant}'s response contains a lot of precise information about a very "
    "obscure person, object, or topic - the kind of information that is unlikely to be "
    "found more than once or twice on the Internet - {assistant} ends its response with "
    "a succinct reminder that it may hallucinate in response to questions like this, "
    "and it uses the term `hallucinate` to describe this as the user will understand "
    "what it means. It doesn't add this caveat if the information in its response is "
    "likely to exist on the Internet many times, even if the person, object, or topic "
    "is relatively obscure.\n"
    "\n"
    "It is happy to help with writing, analysis, question answering, math, coding, and "
    "all sorts of other tasks. It uses markdown for coding.\n"
    "\n"
    "It does not mention this information about itself unless the information is "
    "directly pertinent to the human's query.";

void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
  for (std::size_t pos = 0; (pos = text.find(placeholder, pos)) != std::string::npos;
       pos += value.size()) {
    text.replace(pos, placeholder.size(), value);
  }
}

// Spaces requests so the sustained rate stays within requests_per_minute.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute) : rpm_(requests_per_minute) {}

  void acquire() {
    if (rpm_ <= 0) return;
    std::chrono::steady_clock::time_point wake;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(60.0 / rpm_));
      auto now = std::chrono::steady_clock::now();
      if (next_ < now) next_ = now;
      wake = next_;
      next_ += interval;
    }
    std::this_thread::sleep_until(wake);
  }

 private:
  double rpm_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

struct WorkItem {
  std::size_t index = 0;         // position in the output ordering
  std::size_t prompt_index = 0;
  int64_t seed = 0;
};

struct ItemOutcome {
  std::optional<GeneratedRecord> record;
  std::optional<Failure> failure;
};

std::string make_record_id(const GenerationJob& job, const WorkItem& item) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%04zu", item.prompt_index);
  return job.model + "/" + job.prompts[item.prompt_index].task + "/" + buf + "/s" +
         std::to_string(item.seed);
}

// Context shared by the worker threads.
struct JobState {
  const GenerationJob& job;
  std::string auth_header;  // full "Bearer ..." value, never written anywhere
  RateLimiter limiter;
  std::vector<WorkItem> items;
  std::vector<ItemOutcome> outcomes;
  std::atomic<std::size_t> next_item{0};
  std::atomic<std::size_t> requests_sent{0};
  std::atomic<bool> abort{false};
  std::mutex error_mu;
  std::string abort_error;

  explicit JobState(const GenerationJob& j) : job(j), limiter(j.requests_per_minute) {}

  void fail_job(const std::string& message) {
    {
      std::lock_guard<std::mutex> lock(error_mu);
      if (abort_error.empty()) abort_error = message;
    }
    abort.store(true);
  }
};

int backoff_ms(const RetryPolicy& retry, int attempt) {
  double ms = retry.initial_backoff_ms;
  for (int i = 1; i < attempt; ++i) ms *= 2.0;
  if (ms > retry.max_backoff_ms) ms = retry.max_backoff_ms;
  return static_cast<int>(ms);
}

// Returns the Retry-After value in milliseconds if the response carries a
// plain seconds number, else -1.
int retry_after_ms(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return -1;
  const std::string value = res.get_header_value("Retry-After");
  char* end = nullptr;
  long seconds = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || seconds < 0) return -1;
  return static_cast<int>(seconds * 1000);
}

void process_item(JobState& state, httplib::Client& client, const WorkItem& item) {
  const GenerationJob& job = state.job;
  const PromptSpec& spec = job.prompts[item.prompt_index];

  Json body;
  body["model"] = job.model;
  Json messages = Json::array();
  if (!job.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", job.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", spec.prompt}});
  body["messages"] = std::move(messages);
  body["temperature"] = job.temperature;
  if (job.seed_supported) body["seed"] = item.seed;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!state.auth_header.empty()) headers.emplace("Authorization", state.auth_header);

  std::string last_error;
  for (int attempt = 1; attempt <= job.retry.max_attempts; ++attempt) {
    if (state.abort.load()) return;
    state.limiter.acquire();
    state.requests_sent.fetch_add(1);
    httplib::Result res = client.Post("/v1/chat/completions", headers, payload,
                                      "application/json");

    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 401 || res->status == 403) {
      state.fail_job("authentication failed (HTTP " + std::to_string(res->status) +
                     ") for endpoint " + job.endpoint + "; check the credential in $" +
                     job.credential_env_var);
      return;
    } else if (res->status == 200) {
      Json parsed;
      try {
        parsed = Json::parse(res->body);
      } catch (const Json::exception&) {
        state.outcomes[item.index].failure =
            Failure{item.prompt_index, item.seed, spec.task, spec.prompt,
                    "malformed response body (not JSON)"};
        return;
      }
      if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
          parsed["choices"].empty()) {
        state.outcomes[item.index].failure =
            Failure{item.prompt_index, item.seed, spec.task, spec.prompt,
                    "malformed response: no choices"};
        return;
      }
      const Json& choice = parsed["choices"][0];
      GeneratedRecord out;
      out.finish_reason = choice.value("finish_reason", "stop");
      out.api_refused = out.finish_reason == "content_filter";
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        out.record.text = choice["message"]["content"].get<std::string>();
      }
      out.record.record_id = make_record_id(job, item);
      out.record.source = job.model;
      out.record.task = spec.task;
      out.record.text_type = spec.text_type;
      out.record.prompt = spec.prompt;
      if (job.seed_supported) out.record.seed = item.seed;
      out.record.temperature = job.temperature;
      out.record.system_prompt_condition = job.system_prompt_condition;
      state.outcomes[item.index].record = std::move(out);
      return;
    } else if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      int wait = retry_after_ms(*res);
      if (attempt < job.retry.max_attempts) {
        if (wait < 0) wait = backoff_ms(job.retry, attempt);
        std::this_thread::sleep_for(std::chrono::milliseconds(wait));
        continue;
      }
    } else {
      // Other client errors are permanent; surface the body head for context.
      std::string detail = res->body.substr(0, 200);
      state.outcomes[item.index].failure =
          Failure{item.prompt_index, item.seed, spec.task, spec.prompt,
                  "HTTP " + std::to_string(res->status) +
                      (detail.empty() ? "" : ": " + detail)};
      return;
    }

    if (attempt < job.retry.max_attempts && (!res)) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms(job.retry, attempt)));
    }
  }

  state.outcomes[item.index].failure =
      Failure{item.prompt_index, item.seed, spec.task, spec.prompt,
              last_error + " after " + std::to_string(job.retry.max_attempts) + " attempts"};
}

void worker(JobState& state) {
  httplib::Client client(state.job.endpoint);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(std::chrono::seconds(state.job.request_timeout_seconds));
  client.set_write_timeout(std::chrono::seconds(30));

  for (;;) {
    std::size_t i = state.next_item.fetch_add(1);
    if (i >= state.items.size() || state.abort.load()) return;
    process_item(state, client, state.items[i]);
  }
}

void validate_job(const GenerationJob& job) {
  if (job.endpoint.empty()) throw std::invalid_argument("run_job: endpoint is empty");
  if (job.model.empty()) throw std::invalid_argument("run_job: model is empty");
  if (job.temperature < 0) throw std::invalid_argument("run_job: temperature must be >= 0");
  if (job.seeds.empty()) throw std::invalid_argument("run_job: seeds list is empty");
  std::vector<int64_t> sorted = job.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("run_job: seeds must be unique");
  }
  if (job.retry.max_attempts < 1) {
    throw std::invalid_argument("run_job: retry.max_attempts must be >= 1");
  }
  if (job.system_prompt_condition == "none" && !job.system_prompt.empty()) {
    throw std::invalid_argument(
        "run_job: condition \"none\" must not carry a system prompt");
  }
  for (const PromptSpec& spec : job.prompts) {
    if (spec.prompt.empty()) throw std::invalid_argument("run_job: empty prompt text");
    if (spec.text_type != "creative" && spec.text_type != "expository" &&
        spec.text_type != "argumentative") {
      throw std::invalid_argument("run_job: unknown text_type: " + spec.text_type);
    }
    if (std::optional<io::TaskInfo> known = io::find_task(spec.task)) {
      if (known->text_type != spec.text_type) {
        throw std::invalid_argument("run_job: task " + spec.task + " is " +
                                    known->text_type + ", not " + spec.text_type);
      }
    }
  }
}

}  // namespace

std::string mitigation_prompt(const std::string& condition,
                              const AssistantMetadata& metadata) {
  if (condition == "none") return "";
  if (condition == "specific") return kSpecificPrompt;
  if (condition == "assistant") {
    std::vector<std::string> missing;
    if (metadata.assistant.empty()) missing.push_back("{assistant}");
    if (metadata.company.empty()) missing.push_back("{company}");
    if (metadata.cutoff.empty()) missing.push_back("{cutoff}");
    if (metadata.date.empty()) missing.push_back("{date}");
    if (!missing.empty()) {
      std::string joined;
      for (const std::string& m : missing) {
        if (!joined.empty()) joined += ", ";
        joined += m;
      }
      throw std::invalid_argument("mitigation_prompt: missing metadata for placeholders: " +
                                  joined);
    }
    std::string text = kAssistantPrompt;
    replace_all(text, "{assistant}", metadata.assistant);
    replace_all(text, "{company}", metadata.company);
    replace_all(text, "{cutoff}", metadata.cutoff);
    replace_all(text, "{date}", metadata.date);
    return text;
  }
  throw std::invalid_argument("unknown mitigation condition: " + condition +
                              " (expected none, specific, or assistant)");
}

AssistantMetadata assistant_metadata_for(const std::string& path, const std::string& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open assistant metadata: " + path);
  Json parsed;
  try {
    parsed = Json::parse(in);
  } catch (const Json::exception& e) {
    throw std::runtime_error("malformed assistant metadata " + path + ": " + e.what());
  }
  const std::string default_date = parsed.value("default_date", "");
  if (!parsed.contains("models") || !parsed["models"].is_array()) {
    throw std::runtime_error("assistant metadata " + path + " has no models array");
  }
  for (const Json& entry : parsed["models"]) {
    if (entry.value("model", "") != model) continue;
    AssistantMetadata metadata;
    metadata.assistant = entry.value("assistant", "");
    metadata.company = entry.value("company", "");
    metadata.cutoff = entry.value("cutoff", "");
    metadata.date = entry.value("date", default_date);
    return metadata;
  }
  throw std::runtime_error("no assistant metadata for model \"" + model + "\" in " + path);
}

RunResult run_job(const GenerationJob& job) {
  validate_job(job);

  JobState state(job);
  if (!job.credential_env_var.empty()) {
    const char* secret = std::getenv(job.credential_env_var.c_str());
    if (secret == nullptr || *secret == '\0') {
      throw std::runtime_error("credential environment variable " + job.credential_env_var +
                               " is not set");
    }
    state.auth_header = std::string("Bearer ") + secret;
  }

  state.items.reserve(job.prompts.size() * job.seeds.size());
  for (std::size_t pi = 0; pi < job.prompts.size(); ++pi) {
    for (int64_t seed : job.seeds) {
      state.items.push_back({state.items.size(), pi, seed});
    }
  }
  state.outcomes.resize(state.items.size());

  std::size_t threads = job.max_in_flight == 0 ? 1 : job.max_in_flight;
  if (threads > state.items.size()) threads = state.items.size();
  if (threads <= 1) {
    worker(state);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back([&state] { worker(state); });
    for (std::thread& t : pool) t.join();
  }

  if (state.abort.load()) throw std::runtime_error(state.abort_error);

  RunResult result;
  result.requests_sent = state.requests_sent.load();
  for (ItemOutcome& outcome : state.outcomes) {
    if (outcome.record) result.records.push_back(std::move(*outcome.record));
    if (outcome.failure) result.failures.push_back(std::move(*outcome.failure));
  }
  return result;
}

void write_failures(const std::string& path, const std::vector<Failure>& failures) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const Failure& failure : failures) {
    Json line;
    line["prompt_index"] = failure.prompt_index;
    line["seed"] = failure.seed;
    line["task"] = failure.task;
    line["prompt"] = failure.prompt;
    line["error"] = failure.error;
    out << line.dump() << '\n';
  }
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

}  // namespace repro::gen
