#include "seqsynth/oeis.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace seqsynth::oeis {

std::uint32_t TermStore::intern(const Int& value) {
  auto it = index_.find(value);
  if (it != index_.end()) return it->second;
  std::uint32_t id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  index_.emplace(value, id);
  return id;
}

std::optional<std::uint32_t> TermStore::find(const Int& value) const {
  auto it = index_.find(value);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string format_anum(std::uint32_t anum) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "A%06u", anum);
  return buf;
}

std::optional<std::uint32_t> parse_anum(std::string_view text) {
  if (text.size() < 2 || text.size() > 10 || text[0] != 'A') return std::nullopt;
  std::uint32_t n = 0;
  for (char c : text.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + static_cast<std::uint32_t>(c - '0');
  }
  return n;
}

namespace {

// Line reader over a possibly gzipped file. zlib reads plain files too, so
// one path covers both.
class GzLines {
 public:
  explicit GzLines(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw std::runtime_error("cannot open " + path);
  }
  ~GzLines() {
    if (file_) gzclose(file_);
  }
  GzLines(const GzLines&) = delete;
  GzLines& operator=(const GzLines&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[4096];
    while (gzgets(file_, buf, sizeof buf)) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
    return !line.empty();
  }

 private:
  gzFile file_;
};

}  // namespace

Corpus Corpus::load_stripped(const std::string& path, std::ostream* warnings) {
  Corpus corpus;
  GzLines lines(path);
  std::string line;
  std::size_t lineno = 0;
  auto warn = [&](const std::string& what) {
    if (warnings) *warnings << path << ":" << lineno << ": " << what << ", line skipped\n";
  };

  while (lines.next(line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;

    std::size_t sp = line.find(' ');
    auto anum = parse_anum(std::string_view(line).substr(0, sp == std::string::npos ? line.size() : sp));
    if (sp == std::string::npos || !anum) {
      warn("expected 'A<number> ,terms,'");
      continue;
    }

    std::size_t pos = line.find_first_not_of(' ', sp);
    if (pos == std::string::npos || line[pos] != ',') {
      warn("expected ',' before terms");
      continue;
    }
    ++pos;

    std::vector<std::uint32_t> ids;
    bool ok = true;
    Int value;
    while (pos < line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string_view field = std::string_view(line).substr(
          pos, comma == std::string::npos ? line.size() - pos : comma - pos);
      pos = comma == std::string::npos ? line.size() : comma + 1;
      if (field.empty()) continue;  // trailing comma
      if (!parse_int(field, value)) {
        warn("bad term '" + std::string(field) + "'");
        ok = false;
        break;
      }
      ids.push_back(corpus.store_.intern(value));
    }
    if (!ok) continue;
    if (ids.empty()) {
      warn("sequence has no terms");
      continue;
    }
    if (corpus.by_anum_.count(*anum)) {
      warn("duplicate " + format_anum(*anum));
      continue;
    }

    Sequence seq;
    seq.anum = *anum;
    seq.terms_begin = static_cast<std::uint32_t>(corpus.term_ids_.size());
    seq.terms_len = static_cast<std::uint32_t>(ids.size());
    corpus.term_ids_.insert(corpus.term_ids_.end(), ids.begin(), ids.end());
    corpus.by_anum_.emplace(*anum, corpus.seqs_.size());
    corpus.seqs_.push_back(seq);
  }
  return corpus;
}

std::vector<Int> Corpus::terms_of(std::size_t i) const {
  const Sequence& s = seqs_[i];
  std::vector<Int> out;
  out.reserve(s.terms_len);
  for (std::uint32_t k = 0; k < s.terms_len; ++k) out.push_back(term(s, k));
  return out;
}

std::optional<std::size_t> Corpus::find_anum(std::uint32_t anum) const {
  auto it = by_anum_.find(anum);
  if (it == by_anum_.end()) return std::nullopt;
  return it->second;
}

namespace {

struct TempNode {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> children;  // (term id, node)
  std::vector<std::uint32_t> anums;
};

}  // namespace

SeqTrie::SeqTrie(const Corpus& corpus) : corpus_(corpus) {
  // Sorting the sequences by their id vectors groups shared prefixes, so
  // each node's children come out contiguous and id-sorted in one pass.
  std::vector<std::uint32_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const Corpus::Sequence& sa = corpus.sequence(a);
    const Corpus::Sequence& sb = corpus.sequence(b);
    for (std::uint32_t k = 0; k < sa.terms_len && k < sb.terms_len; ++k) {
      std::uint32_t ta = corpus.term_id(sa, k);
      std::uint32_t tb = corpus.term_id(sb, k);
      if (ta != tb) return ta < tb;
    }
    if (sa.terms_len != sb.terms_len) return sa.terms_len < sb.terms_len;
    return sa.anum < sb.anum;
  });

  std::vector<TempNode> nodes(1);
  // Recursive grouping over [lo, hi) of sequences sharing their first
  // `depth` terms; shorter-sorts-first puts the terminals at the front.
  auto build = [&](auto&& self, std::uint32_t node, std::size_t lo, std::size_t hi,
                   std::uint32_t depth) -> void {
    while (lo < hi && corpus.sequence(order[lo]).terms_len == depth) {
      nodes[node].anums.push_back(corpus.sequence(order[lo]).anum);
      ++lo;
    }
    std::sort(nodes[node].anums.begin(), nodes[node].anums.end());
    while (lo < hi) {
      std::uint32_t t = corpus.term_id(corpus.sequence(order[lo]), depth);
      std::size_t run = lo + 1;
      while (run < hi && corpus.term_id(corpus.sequence(order[run]), depth) == t) ++run;
      std::uint32_t child = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();
      nodes[node].children.emplace_back(t, child);
      self(self, child, lo, run, depth + 1);
      lo = run;
    }
  };
  build(build, 0, 0, order.size(), 0);

  child_begin_.reserve(nodes.size() + 1);
  anum_begin_.reserve(nodes.size() + 1);
  child_begin_.push_back(0);
  anum_begin_.push_back(0);
  for (const TempNode& n : nodes) {
    for (auto [t, c] : n.children) {
      child_term_.push_back(t);
      child_node_.push_back(c);
    }
    anums_.insert(anums_.end(), n.anums.begin(), n.anums.end());
    child_begin_.push_back(static_cast<std::uint32_t>(child_term_.size()));
    anum_begin_.push_back(static_cast<std::uint32_t>(anums_.size()));
  }
}

std::vector<std::uint32_t> SeqTrie::match_stream(interp::TermStream& stream) const {
  std::vector<std::uint32_t> out;
  std::uint32_t node = 0;
  for (;;) {
    for (std::uint32_t i = anum_begin_[node]; i < anum_begin_[node + 1]; ++i)
      out.push_back(anums_[i]);
    std::uint32_t cb = child_begin_[node], ce = child_begin_[node + 1];
    if (cb == ce) return out;  // leaf: don't spend budget on a term nobody needs
    interp::EvalResult r = stream.next();
    if (!r.ok()) return out;
    auto id = corpus_.store().find(r.value);
    if (!id) return out;
    auto first = child_term_.begin() + cb, last = child_term_.begin() + ce;
    auto it = std::lower_bound(first, last, *id);
    if (it == last || *it != *id) return out;
    node = child_node_[cb + static_cast<std::uint32_t>(it - first)];
  }
}

namespace {

bool parse_ll(std::string_view text, long long& out) {
  if (text.empty()) return false;
  std::size_t i = text[0] == '-' ? 1 : 0;
  if (i == text.size()) return false;
  long long v = 0;
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
    v = v * 10 + (text[i] - '0');
  }
  out = text[0] == '-' ? -v : v;
  return true;
}

}  // namespace

BFile load_bfile(const std::string& path) {
  BFile bf;
  GzLines lines(path);
  std::string line;
  std::size_t lineno = 0;
  bool have_first = false;
  while (lines.next(line)) {
    ++lineno;
    std::size_t a = line.find_first_not_of(" \t");
    if (a == std::string::npos || line[a] == '#') continue;
    std::size_t b = line.find_first_of(" \t", a);
    if (b == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'index value'");
    std::size_t c = line.find_first_not_of(" \t", b);
    std::size_t d = c == std::string::npos ? std::string::npos : line.find_first_of(" \t", c);
    long long index;
    Int value;
    if (c == std::string::npos || !parse_ll(std::string_view(line).substr(a, b - a), index) ||
        !parse_int(std::string_view(line).substr(c, d == std::string::npos ? line.size() - c : d - c),
                   value))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'index value'");
    if (!have_first) {
      bf.first_index = index;
      have_first = true;
    } else if (index != bf.first_index + static_cast<long long>(bf.values.size())) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-consecutive index");
    }
    bf.values.push_back(std::move(value));
  }
  return bf;
}

std::optional<std::vector<Int>> extension_terms(const std::vector<Int>& prefix,
                                                const BFile& bfile, std::size_t extra) {
  if (bfile.values.size() < prefix.size()) return std::nullopt;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (bfile.values[i] != prefix[i]) return std::nullopt;
  std::size_t n = std::min(bfile.values.size(), prefix.size() + extra);
  return std::vector<Int>(bfile.values.begin(), bfile.values.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace seqsynth::oeis
