#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqsynth/bigint.hpp"
#include "seqsynth/interp.hpp"

namespace seqsynth::oeis {

// Interns term values so sequences store 32-bit ids and equal terms share
// one big-integer allocation. Ids are dense and assigned in first-seen
// order; they carry no value ordering.
class TermStore {
 public:
  std::uint32_t intern(const Int& value);
  std::optional<std::uint32_t> find(const Int& value) const;
  const Int& value(std::uint32_t id) const { return values_[id]; }
  std::size_t size() const { return values_.size(); }

 private:
  struct Hash {
    std::size_t operator()(const Int& v) const { return hash_int(v); }
  };
  std::vector<Int> values_;
  std::unordered_map<Int, std::uint32_t, Hash> index_;
};

// A sequence database in the OEIS "stripped" format: one line per sequence,
// `A000045 ,0,1,1,2,3,5,...,` with '#' comment lines. Files may be gzipped;
// loading is transparent either way.
class Corpus {
 public:
  struct Sequence {
    std::uint32_t anum;
    std::uint32_t terms_begin;
    std::uint32_t terms_len;
  };

  // Malformed lines are reported to warnings (when given) and skipped.
  static Corpus load_stripped(const std::string& path, std::ostream* warnings);

  std::size_t size() const { return seqs_.size(); }
  const Sequence& sequence(std::size_t i) const { return seqs_[i]; }
  std::uint32_t term_id(const Sequence& s, std::uint32_t k) const {
    return term_ids_[s.terms_begin + k];
  }
  const Int& term(const Sequence& s, std::uint32_t k) const {
    return store_.value(term_id(s, k));
  }
  std::vector<Int> terms_of(std::size_t i) const;
  std::optional<std::size_t> find_anum(std::uint32_t anum) const;
  const TermStore& store() const { return store_; }

 private:
  TermStore store_;
  std::vector<Sequence> seqs_;
  std::vector<std::uint32_t> term_ids_;
  std::unordered_map<std::uint32_t, std::size_t> by_anum_;
};

std::string format_anum(std::uint32_t anum);
std::optional<std::uint32_t> parse_anum(std::string_view text);

// Prefix tree over the corpus in compressed sparse rows: per node a sorted
// run of (term id, child) pairs plus the A-numbers of sequences ending
// there. Matching a program means walking term by term from the root and
// collecting every terminal passed, so one evaluation session serves the
// whole corpus.
class SeqTrie {
 public:
  explicit SeqTrie(const Corpus& corpus);

  // Walks the stream through the trie. A term is only requested while some
  // child could consume it, so the budget spent matches a per-sequence
  // check of the same prefix. Returned A-numbers are in root-to-leaf order.
  std::vector<std::uint32_t> match_stream(interp::TermStream& stream) const;

  std::size_t node_count() const { return child_begin_.size() - 1; }

 private:
  const Corpus& corpus_;
  std::vector<std::uint32_t> child_begin_;
  std::vector<std::uint32_t> child_term_;
  std::vector<std::uint32_t> child_node_;
  std::vector<std::uint32_t> anum_begin_;
  std::vector<std::uint32_t> anums_;
};

// A per-sequence term list in the OEIS b-file format: `index value` lines
// with consecutive indices, '#' comments allowed, optionally gzipped.
struct BFile {
  long long first_index = 0;
  std::vector<Int> values;
};

BFile load_bfile(const std::string& path);

// The corpus prefix extended by up to `extra` continuation values from the
// b-file. Empty when the b-file disagrees with the prefix on their overlap
// or is shorter than the prefix.
std::optional<std::vector<Int>> extension_terms(const std::vector<Int>& prefix,
                                                const BFile& bfile, std::size_t extra);

}  // namespace seqsynth::oeis
