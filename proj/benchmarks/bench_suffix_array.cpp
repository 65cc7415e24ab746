#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "repro/suffix_array.hpp"

namespace {

// English-like byte stream: words of 2-9 lowercase letters drawn from a
// small vocabulary, separated by spaces, with periodic newlines.
std::string synthetic_text(std::size_t target_bytes, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> vocab;
  for (int i = 0; i < 5000; ++i) {
    std::string w;
    std::size_t len = 2 + rng() % 8;
    for (std::size_t j = 0; j < len; ++j)
      w += static_cast<char>('a' + rng() % 26);
    vocab.push_back(std::move(w));
  }
  std::string out;
  out.reserve(target_bytes + 16);
  std::size_t col = 0;
  while (out.size() < target_bytes) {
    const std::string& w = vocab[rng() % vocab.size()];
    out += w;
    col += w.size();
    if (col > 70) {
      out += '\n';
      col = 0;
    } else {
      out += ' ';
      ++col;
    }
  }
  out.resize(target_bytes);
  return out;
}

void BM_BuildSuffixArray(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::string text = synthetic_text(n, 42);
  std::vector<uint32_t> sa(n);
  auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  for (auto _ : state) {
    repro::corpus::build_suffix_array({bytes, n}, sa);
    benchmark::DoNotOptimize(sa.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(n));
}

BENCHMARK(BM_BuildSuffixArray)
    ->Arg(1 << 20)
    ->Arg(16 << 20)
    ->Arg(100 << 20)
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
