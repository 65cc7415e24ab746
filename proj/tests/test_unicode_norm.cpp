#include "repro/unicode_norm.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "repro/utf8.hpp"

using repro::norm::nfc;

namespace {

std::string from_hex(const std::string& hex) {
  REQUIRE(hex.size() % 2 == 0);
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

std::string to_hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

struct FixtureCase {
  std::string input;
  std::string expected;
};

std::vector<FixtureCase> load_fixtures() {
  std::ifstream in(std::string(REPRO_TEST_DATA_DIR) + "/nfc_fixtures.txt");
  REQUIRE(in.is_open());
  std::vector<FixtureCase> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    cases.push_back({from_hex(line.substr(0, tab)), from_hex(line.substr(tab + 1))});
  }
  return cases;
}

}  // namespace

TEST_CASE("ascii passes through untouched") {
  CHECK(nfc("") == "");
  CHECK(nfc("hello, world! 1234") == "hello, world! 1234");
  std::string all;
  for (int c = 1; c < 0x80; ++c) all.push_back(static_cast<char>(c));
  CHECK(nfc(all) == all);
}

TEST_CASE("invalid utf-8 is rejected") {
  CHECK_THROWS_AS(nfc("\xff"), std::invalid_argument);
  CHECK_THROWS_AS(nfc("ok so far \xc3"), std::invalid_argument);
  CHECK_THROWS_AS(nfc("\xed\xa0\x80"), std::invalid_argument);  // surrogate
}

TEST_CASE("reference fixture corpus matches") {
  auto cases = load_fixtures();
  REQUIRE(cases.size() > 2000);
  std::size_t failures = 0;
  for (const auto& c : cases) {
    std::string got = nfc(c.input);
    if (got != c.expected) {
      ++failures;
      if (failures <= 5) {
        // Hex keeps the report readable for combining-mark soup.
        CAPTURE(to_hex(c.input));
        CHECK(to_hex(got) == to_hex(c.expected));
      }
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("normalization is idempotent on fixture inputs") {
  for (const auto& c : load_fixtures()) {
    std::string once = nfc(c.input);
    CHECK(nfc(once) == once);
  }
}

TEST_CASE("random character soup: idempotent and count-bounded") {
  // Alphabet mixes starters, marks with assorted combining classes, Hangul
  // jamo, and astral-plane characters.
  const std::u32string pool = U"ab ęָּཱི̣́́̊̅"
                              U"각가中\U0001f600\U0001d400";
  std::mt19937 rng(77);
  for (int round = 0; round < 300; ++round) {
    std::uniform_int_distribution<std::size_t> len(0, 40);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::u32string s;
    std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s.push_back(pool[pick(rng)]);
    std::string bytes = repro::utf8::encode(s);
    std::string once = nfc(bytes);
    CHECK(repro::utf8::is_valid(once));
    CHECK(nfc(once) == once);
    // Composition never increases the number of scalar values beyond the
    // fully decomposed form, and never below one char per four inputs
    // (max canonical decomposition length is 4 and pairs compose two at a
    // time), so the count stays within a sane envelope.
    CHECK(repro::utf8::char_count(once) <= 4 * s.size());
  }
}
