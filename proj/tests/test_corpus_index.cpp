#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "repro/corpus_index.hpp"
#include "repro/utf8.hpp"

using namespace repro;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("repro_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

corpus::CorpusIndex build_and_load(const std::vector<corpus::Document>& docs,
                                   const std::string& path,
                                   corpus::IndexBuildOptions opts = {}) {
  corpus::VectorDocumentSource src(docs);
  corpus::build_index(src, path, opts);
  return corpus::CorpusIndex::load(path);
}

// Oracle: character-level scan over every document position.
std::size_t oracle_longest_match(const std::vector<std::u32string>& docs,
                                 const std::u32string& query) {
  std::size_t best = 0;
  for (const auto& d : docs) {
    for (std::size_t s = 0; s < d.size(); ++s) {
      std::size_t k = 0;
      while (k < query.size() && s + k < d.size() && d[s + k] == query[k]) ++k;
      best = std::max(best, k);
    }
  }
  return best;
}

std::u32string random_text(std::mt19937_64& rng, std::size_t max_len,
                           const std::u32string& alphabet) {
  std::u32string out;
  const std::size_t len = rng() % (max_len + 1);
  for (std::size_t i = 0; i < len; ++i) out += alphabet[rng() % alphabet.size()];
  return out;
}

}  // namespace

TEST_CASE("empty corpus yields an index answering zero") {
  TempDir tmp;
  auto ix = build_and_load({}, tmp.file("empty.idx"));
  CHECK(ix.doc_count() == 0);
  CHECK(ix.total_chars() == 0);
  CHECK(ix.shard_count() == 0);
  CHECK(ix.longest_match_len("anything") == 0);
  CHECK(ix.longest_match_len("") == 0);
  CHECK(ix.match_lengths("abc") == std::vector<uint32_t>{0, 0, 0});
}

TEST_CASE("single document basics") {
  TempDir tmp;
  auto ix = build_and_load({{"d1", "abcd"}}, tmp.file("one.idx"));
  CHECK(ix.doc_count() == 1);
  CHECK(ix.total_chars() == 4);
  CHECK(ix.longest_match_len("abcd") == 4);
  CHECK(ix.longest_match_len("abcx") == 3);
  CHECK(ix.longest_match_len("xabc") == 0);
  CHECK(ix.longest_match_len("") == 0);
  CHECK(ix.match_lengths("xabc") == std::vector<uint32_t>{0, 3, 2, 1});
  CHECK(ix.match_lengths("abcd") == std::vector<uint32_t>{4, 3, 2, 1});
}

TEST_CASE("query prefix semantics match the hello world example") {
  TempDir tmp;
  auto ix = build_and_load({{"d1", "hello world"}}, tmp.file("hw.idx"));
  CHECK(ix.longest_match_len("world peace") == 5);
}

TEST_CASE("matches never cross document boundaries") {
  TempDir tmp;
  auto ix = build_and_load({{"a", "abc"}, {"b", "def"}}, tmp.file("two.idx"));
  CHECK(ix.longest_match_len("abcdef") == 3);
  CHECK(ix.longest_match_len("cd") == 1);
  CHECK(ix.longest_match_len("cdef") == 1);
}

TEST_CASE("multibyte characters match whole characters only") {
  TempDir tmp;
  // "é" is C3 A9 and "è" is C3 A8: they share one byte but zero characters.
  auto ix = build_and_load({{"d", "a\xc3\xa9z"}}, tmp.file("mb.idx"));
  CHECK(ix.longest_match_len("\xc3\xa8") == 0);
  CHECK(ix.longest_match_len("a\xc3\xa8") == 1);
  CHECK(ix.longest_match_len("a\xc3\xa9") == 2);
  CHECK(ix.longest_match_len("a\xc3\xa9z") == 3);

  CHECK_THROWS(ix.longest_match_len("\xff\xfe"));
  CHECK_THROWS(ix.match_lengths("\x80"));
}

TEST_CASE("oracle equivalence on random corpora and queries") {
  TempDir tmp;
  const std::u32string alphabet = U"abc é€\U00010348";
  std::mt19937_64 rng(2024);

  for (int round = 0; round < 8; ++round) {
    std::vector<std::u32string> docs32;
    std::vector<corpus::Document> docs;
    const std::size_t ndocs = 1 + rng() % 10;
    for (std::size_t d = 0; d < ndocs; ++d) {
      docs32.push_back(random_text(rng, 200, alphabet));
      docs.push_back({"doc" + std::to_string(d), utf8::encode(docs32.back())});
    }
    corpus::IndexBuildOptions opts;
    // Mix shard sizes so multi-shard paths get exercised too.
    opts.target_shard_bytes = (round % 2 == 0) ? (256ull << 20) : 64;
    auto ix = build_and_load(docs, tmp.file("rnd.idx"), opts);

    for (int qi = 0; qi < 125; ++qi) {
      std::u32string q32;
      if (qi % 3 == 0 && !docs32.empty()) {
        // Bias towards near-substrings of the corpus.
        const auto& d = docs32[rng() % docs32.size()];
        if (!d.empty()) {
          std::size_t s = rng() % d.size();
          std::size_t l = std::min<std::size_t>(1 + rng() % 60, d.size() - s);
          q32 = d.substr(s, l);
          if (!q32.empty() && rng() % 2) q32[rng() % q32.size()] = U'Q';
        }
      } else {
        q32 = random_text(rng, 50, alphabet);
      }
      const std::string q = utf8::encode(q32);
      const std::size_t expect = oracle_longest_match(docs32, q32);
      CAPTURE(round);
      CAPTURE(q);
      REQUIRE(ix.longest_match_len(q) == expect);

      // match_lengths must agree with per-suffix longest_match_len.
      auto profile = ix.match_lengths(q);
      REQUIRE(profile.size() == q32.size());
      for (std::size_t i = 0; i < q32.size(); ++i) {
        std::u32string suffix32 = q32.substr(i);
        REQUIRE(profile[i] == oracle_longest_match(docs32, suffix32));
      }
    }
  }
}

TEST_CASE("appending beyond a blocked match never changes the result") {
  TempDir tmp;
  const std::u32string alphabet = U"abé";
  std::mt19937_64 rng(77);
  std::vector<std::u32string> docs32;
  std::vector<corpus::Document> docs;
  for (int d = 0; d < 6; ++d) {
    docs32.push_back(random_text(rng, 100, alphabet));
    docs.push_back({"d" + std::to_string(d), utf8::encode(docs32.back())});
  }
  auto ix = build_and_load(docs, tmp.file("mono.idx"));
  int exercised = 0;
  for (int qi = 0; qi < 300; ++qi) {
    std::u32string q32 = random_text(rng, 30, alphabet);
    std::size_t k = ix.longest_match_len(utf8::encode(q32));
    if (k < q32.size()) {
      std::u32string ext = q32 + random_text(rng, 20, alphabet);
      REQUIRE(ix.longest_match_len(utf8::encode(ext)) == k);
      ++exercised;
    }
    // Substring closure: dropping the first character loses at most one.
    if (!q32.empty()) {
      std::size_t k2 = ix.longest_match_len(utf8::encode(q32.substr(1)));
      REQUIRE(k2 + 1 >= k);
    }
  }
  CHECK(exercised > 50);
}

TEST_CASE("save and load round-trip is query-identical") {
  TempDir tmp;
  std::mt19937_64 rng(31337);
  const std::u32string alphabet = U"abcd é";
  std::vector<corpus::Document> docs;
  std::vector<std::u32string> docs32;
  for (int d = 0; d < 5; ++d) {
    docs32.push_back(random_text(rng, 150, alphabet));
    docs.push_back({"d" + std::to_string(d), utf8::encode(docs32.back())});
  }
  auto ix = build_and_load(docs, tmp.file("a.idx"));
  ix.save(tmp.file("b.idx"));
  auto ix2 = corpus::CorpusIndex::load(tmp.file("b.idx"));

  CHECK(ix.corpus_digest() == ix2.corpus_digest());
  CHECK(ix.doc_count() == ix2.doc_count());
  CHECK(ix.total_chars() == ix2.total_chars());
  for (int qi = 0; qi < 100; ++qi) {
    std::string q = utf8::encode(random_text(rng, 60, alphabet));
    REQUIRE(ix.longest_match_len(q) == ix2.longest_match_len(q));
    REQUIRE(ix.match_lengths(q) == ix2.match_lengths(q));
  }

  auto info = corpus::CorpusIndex::verify_file(tmp.file("b.idx"));
  CHECK(info.doc_count == 5);
  CHECK(info.corpus_digest == ix.corpus_digest());
}

TEST_CASE("rebuilding identical input reproduces the corpus digest") {
  TempDir tmp;
  std::vector<corpus::Document> docs = {{"a", "first doc"}, {"b", "second"}};
  auto ix1 = build_and_load(docs, tmp.file("x1.idx"));
  auto ix2 = build_and_load(docs, tmp.file("x2.idx"));
  CHECK(ix1.corpus_digest() == ix2.corpus_digest());

  auto ix3 = build_and_load({{"a", "first doc"}, {"b", "secondX"}},
                            tmp.file("x3.idx"));
  CHECK(ix1.corpus_digest() != ix3.corpus_digest());
}

TEST_CASE("corrupted or tampered files are rejected") {
  TempDir tmp;
  const std::string path = tmp.file("c.idx");
  {
    std::vector<corpus::Document> docs = {{"d", "some document content here"}};
    corpus::VectorDocumentSource src(docs);
    corpus::build_index(src, path);
  }
  const auto size = fs::file_size(path);

  auto clone_with_byte = [&](uint64_t offset, int delta, const std::string& to) {
    fs::copy_file(path, to, fs::copy_options::overwrite_existing);
    std::fstream f(to, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(static_cast<std::streamoff>(offset));
    char c = 0;
    f.get(c);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(static_cast<char>(c + delta));
  };

  SUBCASE("bad magic") {
    clone_with_byte(0, 1, tmp.file("bad_magic.idx"));
    CHECK_THROWS_WITH_AS(corpus::CorpusIndex::load(tmp.file("bad_magic.idx")),
                         doctest::Contains("not a corpus index"),
                         std::runtime_error);
  }
  SUBCASE("bumped version") {
    clone_with_byte(8, 1, tmp.file("bad_ver.idx"));
    CHECK_THROWS_WITH_AS(corpus::CorpusIndex::load(tmp.file("bad_ver.idx")),
                         doctest::Contains("version unsupported"),
                         std::runtime_error);
  }
  SUBCASE("flipped checksum byte") {
    clone_with_byte(size - 1, 1, tmp.file("bad_sum.idx"));
    CHECK_THROWS_WITH_AS(corpus::CorpusIndex::load(tmp.file("bad_sum.idx")),
                         doctest::Contains("checksum mismatch"),
                         std::runtime_error);
  }
  SUBCASE("flipped payload byte") {
    clone_with_byte(100, 1, tmp.file("bad_payload.idx"));  // inside the payload
    CHECK_THROWS_AS(corpus::CorpusIndex::load(tmp.file("bad_payload.idx")),
                    std::runtime_error);
  }
  SUBCASE("truncated file") {
    fs::copy_file(path, tmp.file("trunc.idx"),
                  fs::copy_options::overwrite_existing);
    fs::resize_file(tmp.file("trunc.idx"), size - 10);
    CHECK_THROWS_AS(corpus::CorpusIndex::load(tmp.file("trunc.idx")),
                    std::runtime_error);
    CHECK_THROWS_AS(corpus::CorpusIndex::verify_file(tmp.file("trunc.idx")),
                    std::runtime_error);
  }
}

TEST_CASE("jsonl corpus source") {
  TempDir tmp;
  const std::string jl = tmp.file("corpus.jsonl");
  {
    std::ofstream f(jl);
    f << R"({"doc_id": "a", "content": "alpha text"})" << "\n";
    f << "\n";
    f << R"({"doc_id": "b", "content": "beta text"})" << "\n";
  }
  corpus::JsonlDocumentSource src(jl);
  corpus::BuildResult res = corpus::build_index(src, tmp.file("jl.idx"));
  CHECK(res.doc_count == 2);
  auto ix = corpus::CorpusIndex::load(tmp.file("jl.idx"));
  CHECK(ix.longest_match_len("alpha") == 5);
  CHECK(ix.longest_match_len("beta") == 4);
}

TEST_CASE("jsonl source error handling") {
  TempDir tmp;
  const std::string jl = tmp.file("bad.jsonl");
  {
    std::ofstream f(jl);
    f << R"({"doc_id": "a", "content": "good line"})" << "\n";
    f << "this is not a record\n";
    f << R"({"content": "missing id"})" << "\n";
    f << R"({"doc_id": "b", "content": "still good"})" << "\n";
  }
  SUBCASE("strict aborts with the line number") {
    corpus::JsonlDocumentSource src(jl);
    corpus::IndexBuildOptions opts;
    opts.strict = true;
    CHECK_THROWS_WITH_AS(corpus::build_index(src, tmp.file("s.idx"), opts),
                         doctest::Contains("line 2"), std::runtime_error);
  }
  SUBCASE("lenient skips and reports") {
    corpus::JsonlDocumentSource src(jl);
    corpus::IndexBuildOptions opts;
    opts.strict = false;
    auto res = corpus::build_index(src, tmp.file("l.idx"), opts);
    CHECK(res.doc_count == 2);
    REQUIRE(res.skipped.size() == 2);
    CHECK(res.skipped[0].message.find("line 2") != std::string::npos);
    CHECK(res.skipped[1].message.find("line 3") != std::string::npos);
  }
}

TEST_CASE("directory corpus source") {
  TempDir tmp;
  fs::create_directories(tmp.path / "corpus" / "sub");
  std::ofstream(tmp.path / "corpus" / "one.txt") << "first file body";
  std::ofstream(tmp.path / "corpus" / "sub" / "two.txt") << "second file body";

  corpus::DirectoryDocumentSource src((tmp.path / "corpus").string());
  auto res = corpus::build_index(src, tmp.file("dir.idx"));
  CHECK(res.doc_count == 2);
  auto ix = corpus::CorpusIndex::load(tmp.file("dir.idx"));
  CHECK(ix.longest_match_len("first file") == 10);
  CHECK(ix.longest_match_len("second") == 6);
}

TEST_CASE("directory source rejects invalid utf8 per strictness") {
  TempDir tmp;
  fs::create_directories(tmp.path / "corpus");
  std::ofstream(tmp.path / "corpus" / "good.txt") << "fine content";
  {
    std::ofstream bad(tmp.path / "corpus" / "bad.bin", std::ios::binary);
    bad.write("\xff\xfe\x80", 3);
  }
  SUBCASE("strict") {
    corpus::DirectoryDocumentSource src((tmp.path / "corpus").string());
    CHECK_THROWS_WITH_AS(corpus::build_index(src, tmp.file("d.idx")),
                         doctest::Contains("bad.bin"), std::runtime_error);
  }
  SUBCASE("lenient") {
    corpus::DirectoryDocumentSource src((tmp.path / "corpus").string());
    corpus::IndexBuildOptions opts;
    opts.strict = false;
    auto res = corpus::build_index(src, tmp.file("d.idx"), opts);
    CHECK(res.doc_count == 1);
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].doc_id == "bad.bin");
  }
}

TEST_CASE("index group takes the element-wise maximum") {
  TempDir tmp;
  corpus::IndexGroup group;
  {
    std::vector<corpus::Document> docs = {{"a", "abcdef"}};
    corpus::VectorDocumentSource s1(docs);
    corpus::build_index(s1, tmp.file("g1.idx"));
    group.add(corpus::CorpusIndex::load(tmp.file("g1.idx")));
  }
  {
    std::vector<corpus::Document> docs = {{"b", "defghi"}};
    corpus::VectorDocumentSource s2(docs);
    corpus::build_index(s2, tmp.file("g2.idx"));
    group.add(corpus::CorpusIndex::load(tmp.file("g2.idx")));
  }
  CHECK(group.doc_count() == 2);
  CHECK(group.longest_match_len("abcdef") == 6);
  CHECK(group.longest_match_len("defghi") == 6);
  CHECK(group.longest_match_len("abcdefghi") == 6);
  CHECK(group.match_lengths("adg") == std::vector<uint32_t>{1, 1, 1});
}

TEST_CASE("nfc flag normalizes indexed content") {
  TempDir tmp;
  // "café" with a decomposed accent; the index stores the composed form.
  std::vector<corpus::Document> docs = {{"d", "café list"}};
  corpus::IndexBuildOptions opts;
  opts.normalize_nfc = true;
  auto ix = build_and_load(docs, tmp.file("n.idx"), opts);
  CHECK(ix.normalize_nfc());
  // 5 chars composed ("café ") vs 4 raw bytes-as-chars if unnormalized.
  CHECK(ix.longest_match_len("café l") == 6);
  // The decomposed query does not hit the composed text beyond "caf".
  CHECK(ix.longest_match_len("café") == 3);

  auto raw = build_and_load(docs, tmp.file("r.idx"));
  CHECK_FALSE(raw.normalize_nfc());
  CHECK(raw.longest_match_len("café l") == 3);
  // Seven scalars: c a f e <combining acute> <space> l.
  CHECK(raw.longest_match_len("café l") == 7);
}

TEST_CASE("digest depends on the nfc flag and on normalization effects") {
  TempDir tmp;
  std::vector<corpus::Document> docs = {{"d", "plain ascii"}};
  corpus::VectorDocumentSource s1(docs), s2(docs);
  corpus::IndexBuildOptions nfc_opts;
  nfc_opts.normalize_nfc = true;
  auto r1 = corpus::build_index(s1, tmp.file("a.idx"));
  auto r2 = corpus::build_index(s2, tmp.file("b.idx"), nfc_opts);
  // Same bytes either way (ASCII), but the flag is part of the identity.
  CHECK(r1.corpus_digest != r2.corpus_digest);
}

TEST_CASE("index group rejects mixed normalization flags") {
  TempDir tmp;
  std::vector<corpus::Document> docs = {{"d", "text"}};
  corpus::VectorDocumentSource s1(docs), s2(docs);
  corpus::IndexBuildOptions nfc_opts;
  nfc_opts.normalize_nfc = true;
  corpus::build_index(s1, tmp.file("a.idx"));
  corpus::build_index(s2, tmp.file("b.idx"), nfc_opts);
  corpus::IndexGroup group;
  group.add(corpus::CorpusIndex::load(tmp.file("a.idx")));
  CHECK_THROWS_WITH(group.add(corpus::CorpusIndex::load(tmp.file("b.idx"))),
                    doctest::Contains("normalization"));
}
