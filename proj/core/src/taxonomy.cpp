#include "repro/taxonomy.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace repro::io {
namespace {

std::vector<TaskInfo> make_builtin() {
  // Prompt templates mirror the documented per-task phrasings; {topic}
  // carries the instance (story premise, subject, movie title, ...).
  return {
      // Creative writing.
      {"writing_prompts", "WritingPrompts", "creative",
       "Write a story (500 words) based on the following prompt: {topic}"},
      {"blog_travel", "blog post (travel)", "creative",
       "Write a fictional travel blog post about {topic}."},
      {"blog_personal", "blog post (personal experience)", "creative",
       "Write a post for a fictional personal experience blog about {topic}."},
      {"fictional_letter", "fictional letter", "creative",
       "Write a fictional letter to {topic}."},
      {"satire", "satire", "creative", "Write a satire about {topic}."},
      // Expository writing.
      {"eli5", "ELI5", "expository",
       "Provide a layperson-friendly explanation of the following: {topic}"},
      {"news_known", "news (known)", "expository",
       "Write a news article about {topic}."},
      {"news_unseen", "news (unseen)", "expository",
       "Write a (fictional) news article about {topic}."},
      {"tutorial", "tutorial", "expository", "Write a tutorial about {topic}."},
      {"encyclopedia", "encyclopedia article", "expository",
       "Write an encyclopedia article about {topic}."},
      // Argumentative writing.
      {"essays", "persuasive essays", "argumentative",
       "Write a short essay (around 500 words). Your assignment is as follows: {topic}"},
      {"reviews_movies", "movie reviews (IMDb)", "argumentative",
       "Write a review for the movie \"{topic}\". Only output the review text without a "
       "title or rating."},
      {"reviews_books", "book reviews", "argumentative",
       "Write a review for the book \"{topic}\". Only output the review text without a "
       "title or rating."},
      {"recommendation_letter", "recommendation letter", "argumentative",
       "Write a recommendation letter for {topic}."},
      {"statement_of_purpose", "statement of purpose", "argumentative",
       "Write a statement of purpose for {topic}."},
  };
}

}  // namespace

const std::vector<TaskInfo>& builtin_taxonomy() {
  static const std::vector<TaskInfo> taxonomy = make_builtin();
  return taxonomy;
}

std::optional<TaskInfo> find_task(std::string_view id) {
  for (const TaskInfo& t : builtin_taxonomy()) {
    if (t.id == id) return t;
  }
  return std::nullopt;
}

std::string instantiate_template(const TaskInfo& task, std::string_view topic) {
  if (topic.empty()) {
    throw std::invalid_argument("instantiate_template: topic is empty");
  }
  const std::string placeholder = "{topic}";
  std::string out = task.prompt_template;
  std::size_t pos = out.find(placeholder);
  if (pos == std::string::npos) {
    throw std::invalid_argument("instantiate_template: template for task \"" + task.id +
                                "\" has no {topic} placeholder");
  }
  while (pos != std::string::npos) {
    out.replace(pos, placeholder.size(), topic);
    pos = out.find(placeholder, pos + topic.size());
  }
  return out;
}

std::vector<TaskInfo> load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw std::runtime_error("cannot open taxonomy file: " + path);
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("tasks") || !j["tasks"].is_array()) {
    throw std::runtime_error("malformed taxonomy file: " + path);
  }
  std::vector<TaskInfo> out;
  for (const auto& t : j["tasks"]) {
    TaskInfo info;
    for (const char* field : {"id", "label", "text_type", "prompt_template"}) {
      if (!t.contains(field) || !t[field].is_string()) {
        throw std::runtime_error("taxonomy task missing string field " + std::string(field) +
                                 ": " + path);
      }
    }
    info.id = t["id"].get<std::string>();
    info.label = t["label"].get<std::string>();
    info.text_type = t["text_type"].get<std::string>();
    info.prompt_template = t["prompt_template"].get<std::string>();
    if (info.text_type != "creative" && info.text_type != "expository" &&
        info.text_type != "argumentative") {
      throw std::runtime_error("taxonomy task \"" + info.id + "\" has unknown text_type \"" +
                               info.text_type + "\"");
    }
    out.push_back(std::move(info));
  }
  return out;
}

}  // namespace repro::io
