#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "seqsynth/bigint.hpp"
#include "seqsynth/interp.hpp"
#include "seqsynth/oeis.hpp"
#include "seqsynth/rng.hpp"
#include "testutil.hpp"

using namespace seqsynth;

namespace {

namespace fs = std::filesystem;

// Unique scratch file, removed on destruction. The unit test binary runs
// alongside others, so names carry the pid.
struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& tag, const std::string& contents = "") {
    path = fs::temp_directory_path() /
           (tag + "." + std::to_string(::getpid()) + ".tmp");
    if (!contents.empty()) {
      std::ofstream out(path);
      out << contents;
    }
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

oeis::Corpus from_text(const std::string& text, std::ostream* warnings = nullptr) {
  TempFile f("seqsynth_corpus", text);
  return oeis::Corpus::load_stripped(f.str(), warnings);
}

}  // namespace

TEST_CASE("term store interns by value") {
  oeis::TermStore store;
  std::uint32_t a = store.intern(Int(42));
  std::uint32_t b = store.intern(Int(-7));
  std::uint32_t c = store.intern(Int(42));
  CHECK(a == c);
  CHECK(a != b);
  CHECK(store.value(a) == 42);
  CHECK(store.value(b) == -7);
  CHECK(store.size() == 2);
  CHECK(store.find(Int(42)) == a);
  CHECK(store.find(Int(-7)) == b);
  CHECK_FALSE(store.find(Int(999)).has_value());

  // Big values intern by value too, not by representation.
  Int big = Int("123456789012345678901234567890");
  CHECK(store.intern(big) == store.intern(Int("123456789012345678901234567890")));
}

TEST_CASE("A-number formatting") {
  CHECK(oeis::format_anum(45) == "A000045");
  CHECK(oeis::format_anum(1146) == "A001146");
  CHECK(oeis::format_anum(999999) == "A999999");
  CHECK(oeis::parse_anum("A000045") == 45u);
  CHECK(oeis::parse_anum("A45") == 45u);
  CHECK(oeis::parse_anum("A0") == 0u);
  CHECK_FALSE(oeis::parse_anum("").has_value());
  CHECK_FALSE(oeis::parse_anum("A").has_value());
  CHECK_FALSE(oeis::parse_anum("B000045").has_value());
  CHECK_FALSE(oeis::parse_anum("A00004x").has_value());
  CHECK_FALSE(oeis::parse_anum("A00000045999").has_value());
}

TEST_CASE("stripped loading accepts the standard shape") {
  std::ostringstream warnings;
  oeis::Corpus c = from_text(
      "# OEIS-style header\n"
      "# another comment\n"
      "A000004 ,0,0,0,0,0,0,0,0,\n"
      "A000045 ,0,1,1,2,3,5,8,13,21,\n"
      "A000142 ,1,1,2,6,24,120,\n",
      &warnings);
  CHECK(warnings.str().empty());
  REQUIRE(c.size() == 3);
  CHECK(c.sequence(0).anum == 4);
  CHECK(c.sequence(1).anum == 45);
  CHECK(c.sequence(2).anum == 142);
  CHECK(c.sequence(1).terms_len == 9);
  CHECK(c.term(c.sequence(1), 6) == 8);
  CHECK(c.terms_of(2) == std::vector<Int>{Int(1), Int(1), Int(2), Int(6), Int(24), Int(120)});
  CHECK(c.find_anum(45) == 1);
  CHECK_FALSE(c.find_anum(46).has_value());
  // Eleven distinct values across the three rows; the zero run interned once.
  CHECK(c.store().size() == 11);
}

TEST_CASE("stripped loading warns and skips malformed or duplicate lines") {
  std::ostringstream warnings;
  oeis::Corpus c = from_text(
      "A000001 ,1,2,3,\n"
      "garbage line\n"
      "A000002 1,2,3,\n"          // missing ',' before terms
      "A000003 ,4,five,6,\n"      // bad term
      "A000001 ,7,8,9,\n"         // duplicate
      "A000005 ,\n"               // no terms
      "A000006 ,-1,-2,-3,\n",
      &warnings);
  REQUIRE(c.size() == 2);
  CHECK(c.sequence(0).anum == 1);
  CHECK(c.sequence(1).anum == 6);
  CHECK(c.terms_of(0) == std::vector<Int>{Int(1), Int(2), Int(3)});
  std::string w = warnings.str();
  CHECK(w.find(":2:") != std::string::npos);
  CHECK(w.find(":3:") != std::string::npos);
  CHECK(w.find("bad term 'five'") != std::string::npos);
  CHECK(w.find("duplicate A000001") != std::string::npos);
  CHECK(w.find("no terms") != std::string::npos);
}

TEST_CASE("gzipped corpora load transparently") {
  TempFile f("seqsynth_gz");
  fs::path gzpath = f.path.string() + ".gz";
  gzFile gz = gzopen(gzpath.string().c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzputs(gz, "# compressed\nA000079 ,1,2,4,8,16,32,\n");
  gzclose(gz);

  oeis::Corpus c = oeis::Corpus::load_stripped(gzpath.string(), nullptr);
  REQUIRE(c.size() == 1);
  CHECK(c.sequence(0).anum == 79);
  CHECK(c.term(c.sequence(0), 5) == 32);
  fs::remove(gzpath);
}

TEST_CASE("missing corpus file throws") {
  CHECK_THROWS_AS(oeis::Corpus::load_stripped("/nonexistent/path/stripped", nullptr),
                  std::runtime_error);
}

TEST_CASE("trie matching equals per-sequence coverage checks") {
  // Shared prefixes on purpose: 1,2,4... splits from 1,2,3... after two
  // terms, and A000010/A000011 coincide for four terms.
  oeis::Corpus c = from_text(
      "A000010 ,1,2,3,4,5,6,7,\n"
      "A000011 ,1,2,3,4,9,9,\n"
      "A000012 ,1,2,4,8,16,\n"
      "A000013 ,0,1,4,9,16,25,\n"
      "A000014 ,1,2,3,4,5,6,7,8,9,10,\n"
      "A000015 ,5,\n");
  oeis::SeqTrie trie(c);

  std::vector<dsl::Program> programs = {
      dsl::parse("add(x,1)"),          // 1,2,3,... covers A000010 and A000014
      dsl::parse("mul(x,x)"),          // 0,1,4,9 covers A000013
      dsl::parse("add(1,mul(x,x))"),   // covers nothing (1,2,5,...)
      dsl::parse("div(1,sub(2,x))"),   // aborts at x = 2
      dsl::parse("add(add(1,add(2,2)),x)"),  // 5,6,7,... covers the one-term A000015
      dsl::parse("loop(mul(2,x),x,1)") // 1,2,4,8 covers A000012
  };
  interp::Budget budget = interp::Budget::abstract_default();
  rng::Engine rng(33);
  for (int extra = 0; extra < 200; ++extra)
    programs.push_back(testutil::random_program(rng, 10));

  for (const dsl::Program& p : programs) {
    if (p.free_y()) continue;
    interp::TermStream stream(p, budget);
    std::vector<std::uint32_t> got = trie.match_stream(stream);
    std::set<std::uint32_t> direct;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (interp::covers(p, c.terms_of(i), budget)) direct.insert(c.sequence(i).anum);
    CHECK(std::set<std::uint32_t>(got.begin(), got.end()) == direct);
    CHECK(got.size() == direct.size());  // no duplicates in the walk
  }
}

TEST_CASE("trie walk spends no more budget than the deepest needed prefix") {
  oeis::Corpus c = from_text("A000001 ,0,1,2,\nA000002 ,0,1,2,3,4,5,\n");
  oeis::SeqTrie trie(c);
  CHECK(trie.node_count() >= 7);  // root plus one node per distinct prefix

  // x costs one step per term; six terms decide everything: after 0..5
  // both sequences have ended, so the walk must not request a seventh term.
  interp::TermStream stream(dsl::parse("x"), interp::Budget::abstract_steps(6, 0));
  std::vector<std::uint32_t> got = trie.match_stream(stream);
  CHECK(got == std::vector<std::uint32_t>{1, 2});
  CHECK(stream.terms_produced() == 6);
  // The stream is still alive: the walk stopped by itself, not by abort.
  CHECK(stream.next().status == interp::EvalResult::Status::OutOfBudget);
}

TEST_CASE("b-files") {
  SUBCASE("well formed, with comments and negative start") {
    TempFile f("seqsynth_bfile",
               "# b-file comment\n"
               "-1 10\n"
               "0 20\n"
               "1 30\n"
               "2 123456789012345678901234567890\n");
    oeis::BFile b = oeis::load_bfile(f.str());
    CHECK(b.first_index == -1);
    REQUIRE(b.values.size() == 4);
    CHECK(b.values[0] == 10);
    CHECK(b.values[3] == Int("123456789012345678901234567890"));
  }
  SUBCASE("index gaps are rejected") {
    TempFile f("seqsynth_bfile_gap", "1 10\n2 20\n4 40\n");
    CHECK_THROWS_WITH_AS(oeis::load_bfile(f.str()),
                         doctest::Contains(":3: non-consecutive"), std::runtime_error);
  }
  SUBCASE("malformed lines are rejected") {
    TempFile f("seqsynth_bfile_bad", "1 10\ntwo 20\n");
    CHECK_THROWS_AS(oeis::load_bfile(f.str()), std::runtime_error);
  }
}

TEST_CASE("extension terms") {
  std::vector<Int> prefix{Int(0), Int(1), Int(4), Int(9)};
  SUBCASE("agreement extends by up to extra terms") {
    oeis::BFile b;
    b.first_index = 0;
    for (long i = 0; i < 8; ++i) b.values.push_back(Int(i * i));
    auto ext = oeis::extension_terms(prefix, b, 2);
    REQUIRE(ext.has_value());
    CHECK(*ext == std::vector<Int>{Int(0), Int(1), Int(4), Int(9), Int(16), Int(25)});
    // More extra than available: extends to the b-file's end.
    ext = oeis::extension_terms(prefix, b, 100);
    REQUIRE(ext.has_value());
    CHECK(ext->size() == 8);
  }
  SUBCASE("overlap disagreement is rejected") {
    oeis::BFile b;
    b.first_index = 0;
    b.values = {Int(0), Int(1), Int(4), Int(10), Int(16)};
    CHECK_FALSE(oeis::extension_terms(prefix, b, 2).has_value());
  }
  SUBCASE("b-file shorter than the prefix is rejected") {
    oeis::BFile b;
    b.first_index = 0;
    b.values = {Int(0), Int(1), Int(4)};
    CHECK_FALSE(oeis::extension_terms(prefix, b, 2).has_value());
  }
}

TEST_CASE("the generated fixture corpus loads cleanly") {
  std::ostringstream warnings;
  oeis::Corpus c = oeis::Corpus::load_stripped(
      testutil::fixture_path("corpus_small.txt"), &warnings);
  CHECK(warnings.str().empty());
  CHECK(c.size() >= 140);
  // The classics are present with their conventional numbers.
  auto fib = c.find_anum(45);
  REQUIRE(fib.has_value());
  CHECK(c.term(c.sequence(*fib), 10) == 55);
  oeis::SeqTrie trie(c);
  CHECK(trie.node_count() > c.size());
}
