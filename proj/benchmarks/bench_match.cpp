#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "repro/corpus_index.hpp"

namespace {

std::vector<std::string> make_vocab(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> vocab;
  for (int i = 0; i < 5000; ++i) {
    std::string w;
    std::size_t len = 2 + rng() % 8;
    for (std::size_t j = 0; j < len; ++j)
      w += static_cast<char>('a' + rng() % 26);
    vocab.push_back(std::move(w));
  }
  return vocab;
}

std::string words_text(std::mt19937_64& rng, const std::vector<std::string>& vocab,
                       std::size_t target_bytes) {
  std::string out;
  out.reserve(target_bytes + 16);
  while (out.size() < target_bytes) {
    out += vocab[rng() % vocab.size()];
    out += ' ';
  }
  out.resize(target_bytes);
  return out;
}

struct Fixture {
  // Declaration order matters: make() fills index_path and corpus_blob, so
  // both must be constructed before `index` is initialized from make().
  std::string index_path;
  std::string corpus_blob;
  repro::corpus::CorpusIndex index;
  std::string novel_text;   // same vocabulary, fresh draws
  std::string copied_text;  // stitched verbatim corpus excerpts

  Fixture() : index(make()) {
    std::mt19937_64 rng(999);
    auto vocab = make_vocab(42);
    novel_text = words_text(rng, vocab, 2 << 20);
    copied_text.reserve(2 << 20);
    while (copied_text.size() < (2 << 20)) {
      std::size_t start = rng() % (corpus_blob.size() - 4000);
      std::size_t len = 200 + rng() % 1800;
      copied_text.append(corpus_blob, start, len);
      copied_text += ' ';
    }
    copied_text.resize(2 << 20);
  }

  repro::corpus::CorpusIndex make() {
    namespace fs = std::filesystem;
    index_path = (fs::temp_directory_path() / "bench_match.idx").string();
    std::mt19937_64 rng(42);
    auto vocab = make_vocab(42);

    std::vector<repro::corpus::Document> docs;
    const std::size_t total = 100ull << 20;
    std::size_t made = 0;
    int id = 0;
    while (made < total) {
      std::size_t len = 64 << 10;
      repro::corpus::Document d;
      d.doc_id = "doc" + std::to_string(id++);
      d.content = words_text(rng, vocab, len);
      corpus_blob += d.content;
      made += len;
      docs.push_back(std::move(d));
    }
    repro::corpus::VectorDocumentSource src(std::move(docs));
    repro::corpus::build_index(src, index_path);
    return repro::corpus::CorpusIndex::load(index_path);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_MatchNovelText(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    auto v = f.index.match_lengths(f.novel_text);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(f.novel_text.size()));
}

void BM_MatchCopiedText(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    auto v = f.index.match_lengths(f.copied_text);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(f.copied_text.size()));
}

BENCHMARK(BM_MatchNovelText)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatchCopiedText)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
