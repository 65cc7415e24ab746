#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace repro::io {

// One task of the experiment grid: a machine-friendly id, the display
// label, its text type, and the prompt template with a {topic} placeholder.
struct TaskInfo {
  std::string id;
  std::string label;
  std::string text_type;  // creative | expository | argumentative
  std::string prompt_template;

  bool operator==(const TaskInfo&) const = default;
};

// The built-in 15-task taxonomy, grouped into creative, expository, and
// argumentative writing.  data/taxonomy.json ships the same content for
// auditing and extension.
const std::vector<TaskInfo>& builtin_taxonomy();

// Looks up a built-in task by id; empty for free-form tasks.
std::optional<TaskInfo> find_task(std::string_view id);

// Replaces every {topic} placeholder.  Throws std::invalid_argument if the
// template contains no placeholder or the topic is empty.
std::string instantiate_template(const TaskInfo& task, std::string_view topic);

// Loads a taxonomy file (same JSON shape as data/taxonomy.json).
std::vector<TaskInfo> load_taxonomy(const std::string& path);

}  // namespace repro::io
