#include "repro/hygiene.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "repro/utf8.hpp"

namespace repro::hygiene {
namespace {

// Note the apostrophe variants: the penultimate "sorry" prefix uses the
// typographic U+2019, everything else the ASCII quote.
const char* const kBuiltinPrefixes[] = {
    "Apologies, but",
    "As an AI",
    "I am sorry, but",
    "I apologize, but",
    "I can't assist",
    "I can't satisfy your request",
    "I cannot fulfill your request",
    "I cannot provide a response",
    "I cannot provide a story that",
    "I must apologize, but I cannot provide a response",
    "I'm not able to provide a story based on that prompt",
    "I'm sorry but",
    "I'm sorry for",
    "I'm sorry, but",
    "I’m sorry, but",
    "Sorry, but",
};

}  // namespace

RefusalPolicy RefusalPolicy::builtin() {
  RefusalPolicy p;
  p.min_length = 20;
  for (const char* prefix : kBuiltinPrefixes) p.refusal_prefixes.push_back(prefix);
  return p;
}

RefusalPolicy RefusalPolicy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw std::runtime_error("cannot open refusal policy file: " + path);
  }
  RefusalPolicy p;
  p.min_length = 0;
  bool have_header = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      std::istringstream header(line);
      std::string keyword;
      long long value = -1;
      header >> keyword >> value;
      if (keyword != "min_length" || value < 0 || !header) {
        throw std::runtime_error("refusal policy must start with \"min_length <N>\": " + path);
      }
      p.min_length = static_cast<uint32_t>(value);
      have_header = true;
      continue;
    }
    p.refusal_prefixes.push_back(line);
  }
  if (!have_header) {
    throw std::runtime_error("refusal policy missing min_length header: " + path);
  }
  return p;
}

void RefusalPolicy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) {
    throw std::runtime_error("cannot open refusal policy file for writing: " + path);
  }
  out << "min_length " << min_length << '\n';
  for (const std::string& prefix : refusal_prefixes) out << prefix << '\n';
  out.flush();
  if (!out.good()) {
    throw std::runtime_error("failed writing refusal policy file: " + path);
  }
}

RefusalCheck is_refusal(std::string_view text, const RefusalPolicy& policy) {
  if (!utf8::is_valid(text)) {
    throw std::invalid_argument("is_refusal: text is not valid UTF-8");
  }
  if (utf8::char_count(text) < policy.min_length) {
    return {true, "length < " + std::to_string(policy.min_length)};
  }
  const std::string_view stripped = text.substr(utf8::skip_leading_whitespace(text));
  for (const std::string& prefix : policy.refusal_prefixes) {
    if (stripped.substr(0, prefix.size()) == prefix) {
      return {true, "prefix: " + prefix};
    }
  }
  return {false, ""};
}

FilterResult filter_records(const std::vector<io::TextRecord>& records,
                            const RefusalPolicy& policy) {
  FilterResult result;
  for (const io::TextRecord& r : records) {
    RefusalCheck check = is_refusal(r.text, policy);
    if (check.refusal) {
      result.dropped.push_back({r, check.reason});
    } else {
      result.kept.push_back(r);
    }
  }
  return result;
}

}  // namespace repro::hygiene
