#include "repro/metrics.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "repro/utf8.hpp"

namespace repro::metrics {
namespace {

// Suffix automaton over the prompt.  Built once per record, then streamed
// over the text to find, for every text position, the longest prompt
// substring ending there.
class SuffixAutomaton {
 public:
  explicit SuffixAutomaton(std::u32string_view s) {
    states_.reserve(2 * s.size() + 4);
    states_.emplace_back();  // root: empty substring
    for (char32_t c : s) extend(c);
  }

  // f[j] = length of the longest common suffix of text[0..j] and any
  // substring of the prompt (equivalently: the longest prompt substring
  // ending at text position j).
  std::vector<uint32_t> longest_suffix_match(std::u32string_view text) const {
    std::vector<uint32_t> f(text.size(), 0);
    int v = 0;
    uint32_t len = 0;
    for (std::size_t j = 0; j < text.size(); ++j) {
      char32_t c = text[j];
      auto it = states_[v].next.find(c);
      while (v != 0 && it == states_[v].next.end()) {
        v = states_[v].link;
        len = states_[v].len;
        it = states_[v].next.find(c);
      }
      if (it != states_[v].next.end()) {
        v = it->second;
        ++len;
      } else {
        v = 0;
        len = 0;
      }
      f[j] = len;
    }
    return f;
  }

 private:
  struct State {
    uint32_t len = 0;
    int link = -1;
    std::unordered_map<char32_t, int> next;
  };

  void extend(char32_t c) {
    int cur = static_cast<int>(states_.size());
    states_.emplace_back();
    states_[cur].len = states_[last_].len + 1;
    int p = last_;
    while (p != -1 && states_[p].next.find(c) == states_[p].next.end()) {
      states_[p].next.emplace(c, cur);
      p = states_[p].link;
    }
    if (p == -1) {
      states_[cur].link = 0;
    } else {
      int q = states_[p].next.at(c);
      if (states_[p].len + 1 == states_[q].len) {
        states_[cur].link = q;
      } else {
        int clone = static_cast<int>(states_.size());
        states_.push_back(states_[q]);
        states_[clone].len = states_[p].len + 1;
        while (p != -1) {
          auto it = states_[p].next.find(c);
          if (it == states_[p].next.end() || it->second != q) break;
          it->second = clone;
          p = states_[p].link;
        }
        states_[q].link = clone;
        states_[cur].link = clone;
      }
    }
    last_ = cur;
  }

  std::vector<State> states_;
  int last_ = 0;
};

// Longest common substring of text[i : i + w) with the prompt, given the
// per-position longest-suffix-match array `f`.  Any prompt match ending at
// j can be truncated to start inside the window (substrings of prompt
// substrings are still prompt substrings), so the answer is
// max over j in [i, i+w) of min(f[j], j - i + 1).  The scan runs right to
// left so the positional bound j - i + 1 gives an early exit, and whole
// 64-position blocks are skipped when their maximum cannot improve the
// running best.
uint32_t window_prompt_overlap(const std::vector<uint32_t>& f,
                               const std::vector<uint32_t>& block_max, std::size_t i,
                               std::size_t w) {
  uint32_t best = 0;
  std::size_t hi = i + w;  // exclusive
  while (hi > i) {
    std::size_t block = (hi - 1) >> 6;
    std::size_t lo = std::max(i, block << 6);
    if (block_max[block] > best) {
      for (std::size_t j = hi; j-- > lo;) {
        if (j - i + 1 <= best) return best;
        best = std::max(best, std::min(f[j], static_cast<uint32_t>(j - i + 1)));
      }
    }
    if (lo <= i) break;
    if (lo - i <= best) break;  // positions left of `lo` cannot beat best
    hi = lo;
  }
  return best;
}

ReproducedSnippet make_snippet(std::string_view text, const std::vector<uint32_t>& offsets,
                               std::size_t start, std::size_t length, SnippetKind kind) {
  ReproducedSnippet s;
  s.start = start;
  s.length = length;
  s.text = std::string(text.substr(offsets[start], offsets[start + length] - offsets[start]));
  s.kind = kind;
  return s;
}

}  // namespace

MatchProfile match_profile(const corpus::CorpusIndex& index, std::string_view text) {
  MatchProfile p;
  p.raw = index.match_lengths(text);
  p.text_len = p.raw.size();
  return p;
}

MatchProfile match_profile(const corpus::IndexGroup& group, std::string_view text) {
  MatchProfile p;
  p.raw = group.match_lengths(text);
  p.text_len = p.raw.size();
  return p;
}

PromptDiscount prompt_discount(const MatchProfile& profile, std::string_view text,
                               std::string_view prompt) {
  if (!utf8::is_valid(text)) {
    throw std::invalid_argument("prompt_discount: text is not valid UTF-8");
  }
  if (!utf8::is_valid(prompt)) {
    throw std::invalid_argument("prompt_discount: prompt is not valid UTF-8");
  }
  std::u32string chars = utf8::decode(text);
  if (chars.size() != profile.raw.size()) {
    throw std::invalid_argument("prompt_discount: profile does not match text length");
  }
  const std::size_t n = chars.size();
  PromptDiscount out;
  out.prompt_overlap.assign(n, 0);
  out.discounted = profile.raw;
  if (n == 0 || prompt.empty()) return out;

  SuffixAutomaton sam(utf8::decode(prompt));
  std::vector<uint32_t> f = sam.longest_suffix_match(chars);
  std::vector<uint32_t> block_max((n >> 6) + 1, 0);
  for (std::size_t j = 0; j < n; ++j) {
    block_max[j >> 6] = std::max(block_max[j >> 6], f[j]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (profile.raw[i] == 0) continue;
    uint32_t overlap = window_prompt_overlap(f, block_max, i, profile.raw[i]);
    out.prompt_overlap[i] = overlap;
    out.discounted[i] = profile.raw[i] - overlap;
  }
  return out;
}

std::vector<uint32_t> reproduction_lengths(const std::vector<uint32_t>& raw,
                                           const std::vector<uint32_t>& discounted) {
  if (raw.size() != discounted.size()) {
    throw std::invalid_argument("reproduction_lengths: raw and discounted lengths differ");
  }
  const std::size_t n = raw.size();
  std::vector<uint32_t> out(n, 0);

  // Real match profiles satisfy raw[i+1] >= raw[i] - 1, which makes the
  // match end positions i + raw[i] non-decreasing.  Candidates then expire
  // in insertion order and a monotonic max-deque computes the covering max
  // in O(n).
  bool ends_monotone = true;
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = i + raw[i];
    if (end < prev_end) {
      ends_monotone = false;
      break;
    }
    prev_end = end;
  }

  if (ends_monotone) {
    struct Cand {
      std::size_t end;
      uint32_t val;
    };
    std::deque<Cand> dq;  // values strictly decreasing front to back
    for (std::size_t i = 0; i < n; ++i) {
      if (raw[i] > 0) {
        const Cand c{i + raw[i], discounted[i]};
        // The new candidate expires no earlier than anything queued, so it
        // dominates every entry with a smaller-or-equal value.
        while (!dq.empty() && dq.back().val <= c.val) dq.pop_back();
        dq.push_back(c);
      }
      while (!dq.empty() && dq.front().end <= i) dq.pop_front();
      if (!dq.empty()) out[i] = dq.front().val;
    }
    return out;
  }

  // Fallback for arbitrary arrays: lazy max-heap keyed on value; expired
  // entries are discarded when they surface at the top.
  struct Cand {
    uint32_t val;
    std::size_t end;
    bool operator<(const Cand& o) const { return val < o.val; }
  };
  std::priority_queue<Cand> heap;
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] > 0) heap.push({discounted[i], i + raw[i]});
    while (!heap.empty() && heap.top().end <= i) heap.pop();
    if (!heap.empty()) out[i] = heap.top().val;
  }
  return out;
}

double overlap_rate(const std::vector<uint32_t>& reproduction, uint32_t threshold) {
  if (threshold == 0) {
    throw std::invalid_argument("overlap_rate: threshold must be at least 1");
  }
  if (reproduction.empty()) return 0.0;
  std::size_t hits = 0;
  for (uint32_t r : reproduction) {
    if (r >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(reproduction.size());
}

std::vector<ReproducedSnippet> extract_snippets(std::string_view text,
                                                const std::vector<uint32_t>& reproduction,
                                                uint32_t threshold) {
  if (!utf8::is_valid(text)) {
    throw std::invalid_argument("extract_snippets: text is not valid UTF-8");
  }
  std::vector<uint32_t> offsets = utf8::char_offsets(text);
  const std::size_t n = offsets.size() - 1;
  if (reproduction.size() != n) {
    throw std::invalid_argument("extract_snippets: reproduction array does not match text");
  }
  std::vector<ReproducedSnippet> spans;
  std::size_t i = 0;
  while (i < n) {
    if (reproduction[i] < threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && reproduction[j] >= threshold) ++j;
    spans.push_back(make_snippet(text, offsets, i, j - i, SnippetKind::kMaximalSpan));
    i = j;
  }
  return spans;
}

FixedWindowSample sample_fixed_windows(std::string_view text,
                                       const std::vector<uint32_t>& reproduction,
                                       uint32_t threshold, std::size_t window_len,
                                       uint64_t rng_seed) {
  if (window_len == 0) {
    throw std::invalid_argument("sample_fixed_windows: window_len must be at least 1");
  }
  if (!utf8::is_valid(text)) {
    throw std::invalid_argument("sample_fixed_windows: text is not valid UTF-8");
  }
  std::u32string chars = utf8::decode(text);
  const std::size_t n = chars.size();
  if (reproduction.size() != n) {
    throw std::invalid_argument("sample_fixed_windows: reproduction array does not match text");
  }
  FixedWindowSample sample;
  if (window_len > n) return sample;

  // Prefix counts of at-threshold positions: a window is a candidate only
  // when it is uniformly above or uniformly below.
  std::vector<uint32_t> pre(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    pre[i + 1] = pre[i] + (reproduction[i] >= threshold ? 1 : 0);
  }
  std::vector<std::size_t> reproduced_starts;
  std::vector<std::size_t> other_starts;
  for (std::size_t s = 0; s + window_len <= n; ++s) {
    if (s != 0 && !utf8::is_whitespace(chars[s - 1])) continue;
    const uint32_t above = pre[s + window_len] - pre[s];
    if (above == window_len) {
      reproduced_starts.push_back(s);
    } else if (above == 0) {
      other_starts.push_back(s);
    }
  }

  // mt19937_64 has a fully specified output sequence, so draws reproduce
  // across platforms.  The reproduced class always draws first.
  std::vector<uint32_t> offsets = utf8::char_offsets(text);
  std::mt19937_64 rng(rng_seed);
  if (!reproduced_starts.empty()) {
    const std::size_t pick = reproduced_starts[rng() % reproduced_starts.size()];
    sample.reproduced = make_snippet(text, offsets, pick, window_len, SnippetKind::kFixedWindow);
  }
  if (!other_starts.empty()) {
    const std::size_t pick = other_starts[rng() % other_starts.size()];
    sample.non_reproduced =
        make_snippet(text, offsets, pick, window_len, SnippetKind::kFixedWindow);
  }
  return sample;
}

ReproductionProfile reproduction_profile(const MatchProfile& profile, std::string_view text,
                                         std::string_view prompt, uint32_t threshold) {
  ReproductionProfile rp;
  PromptDiscount d = prompt_discount(profile, text, prompt);
  rp.prompt_overlap = std::move(d.prompt_overlap);
  rp.discounted = std::move(d.discounted);
  rp.reproduction = reproduction_lengths(profile.raw, rp.discounted);
  rp.overlap_rate = overlap_rate(rp.reproduction, threshold);
  return rp;
}

}  // namespace repro::metrics
