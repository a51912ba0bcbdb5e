#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "seqsynth/dsl.hpp"
#include "seqsynth/interp.hpp"
#include "seqsynth/oeis.hpp"
#include "seqsynth/search_tree.hpp"
#include "seqsynth/selflearn.hpp"
#include "seqsynth/tnn.hpp"

namespace {

using namespace seqsynth;

// Budgets on the command line are given in microseconds and converted to
// deterministic abstract steps at 200 steps per microsecond, matching the
// default of 50us -> 10000 steps.
constexpr std::uint64_t kStepsPerMicro = 200;

interp::Budget budget_from_micros(std::uint64_t micros) {
  return interp::Budget::abstract_steps(micros * kStepsPerMicro, micros * kStepsPerMicro);
}

oeis::Corpus load_corpus(const std::string& path) {
  return oeis::Corpus::load_stripped(path, &std::cerr);
}

std::vector<Int> parse_terms_csv(const std::string& csv) {
  std::vector<Int> terms;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    std::string field = csv.substr(pos, comma == std::string::npos ? csv.size() - pos : comma - pos);
    pos = comma == std::string::npos ? csv.size() + 1 : comma + 1;
    if (field.empty()) continue;
    Int v;
    if (!parse_int(field, v)) throw std::runtime_error("bad term '" + field + "'");
    terms.push_back(std::move(v));
  }
  if (terms.empty()) throw std::runtime_error("no terms given");
  return terms;
}

int cmd_eval(const std::string& program_text, std::uint64_t terms, std::uint64_t budget_us) {
  dsl::Program p = dsl::parse(program_text);
  if (p.free_y()) {
    std::cerr << "error: program has a free y and is not a sequence\n";
    return 1;
  }
  interp::Budget budget =
      budget_us > 0 ? budget_from_micros(budget_us) : interp::Budget::abstract_default();
  interp::TermStream stream(p, budget);
  for (std::uint64_t i = 0; i < terms; ++i) {
    interp::EvalResult r = stream.next();
    if (!r.ok()) {
      std::cerr << "aborted at term " << i << ": " << interp::status_name(r.status) << '\n';
      return 2;
    }
    std::cout << to_string(r.value) << '\n';
  }
  return 0;
}

int cmd_match(const std::string& stripped, const std::string& terms_csv, const std::string& db_path) {
  std::vector<Int> terms = parse_terms_csv(terms_csv);
  oeis::Corpus corpus = load_corpus(stripped);
  selflearn::SolutionDb db;
  if (!db_path.empty()) db = selflearn::load_db(db_path);

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const oeis::Corpus::Sequence& s = corpus.sequence(i);
    if (s.terms_len < terms.size()) continue;
    bool prefix = true;
    for (std::size_t k = 0; k < terms.size() && prefix; ++k)
      prefix = corpus.term(s, static_cast<std::uint32_t>(k)) == terms[k];
    if (!prefix) continue;
    std::cout << oeis::format_anum(s.anum);
    if (auto it = db.find(s.anum); it != db.end())
      std::cout << ' ' << dsl::print(it->second.program);
    std::cout << '\n';
  }
  return 0;
}

int cmd_search(const std::string& stripped, const std::string& anum_text,
               const std::string& model_path, std::uint64_t iterations, std::uint64_t millis,
               std::uint64_t seed, bool noise) {
  oeis::Corpus corpus = load_corpus(stripped);
  auto anum = oeis::parse_anum(anum_text);
  if (!anum) {
    std::cerr << "error: bad A-number '" << anum_text << "'\n";
    return 1;
  }
  auto idx = corpus.find_anum(*anum);
  if (!idx) {
    std::cerr << "error: " << anum_text << " is not in the corpus\n";
    return 1;
  }

  tnn::Model model = model_path.empty() ? tnn::Model::init(64, seed) : tnn::load_model(model_path);
  std::vector<Int> terms = corpus.terms_of(*idx);
  tnn::SequenceKey key = tnn::SequenceKey::from_terms(terms);
  search::SearchLimits limits{iterations, millis};
  search::SearchResult result = search::run_search(model, key, limits, noise, seed);

  std::vector<dsl::Program> covering;
  for (const dsl::Program& p : result.programs)
    if (!p.free_y() && interp::covers(p, terms, interp::Budget::abstract_default()))
      covering.push_back(p);
  std::sort(covering.begin(), covering.end(), dsl::ProgramLess{});

  std::cout << "programs " << result.programs.size() << '\n';
  std::cout << "covering " << covering.size() << '\n';
  for (const dsl::Program& p : covering) std::cout << dsl::print(p) << '\n';
  return 0;
}

int cmd_ingest(const std::string& stripped, const std::string& bfile_dir) {
  oeis::Corpus corpus = load_corpus(stripped);
  oeis::SeqTrie trie(corpus);
  std::cout << "sequences " << corpus.size() << '\n';
  std::cout << "distinct-terms " << corpus.store().size() << '\n';
  std::cout << "trie-nodes " << trie.node_count() << '\n';
  std::cout << "key-uniqueness " << selflearn::key_uniqueness(corpus) << '\n';

  if (!bfile_dir.empty()) {
    std::size_t found = 0, agree = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& seq = corpus.sequence(i);
      std::string path = bfile_dir + "/b" + oeis::format_anum(seq.anum).substr(1) + ".txt";
      if (!std::filesystem::exists(path)) continue;
      ++found;
      oeis::BFile bf = oeis::load_bfile(path);
      if (oeis::extension_terms(corpus.terms_of(i), bf, 0)) ++agree;
    }
    std::cout << "bfiles " << found << '\n';
    std::cout << "bfiles-agreeing " << agree << '\n';
  }
  return 0;
}

int cmd_verify(const std::string& stripped, const std::string& db_path,
               const std::string& bfile_dir, std::uint64_t extra) {
  oeis::Corpus corpus = load_corpus(stripped);
  selflearn::SolutionDb db = selflearn::load_db(db_path);

  std::size_t with_bfile = 0, passed = 0, skipped = 0;
  for (const auto& [anum, rec] : db) {
    auto idx = corpus.find_anum(anum);
    std::string path = bfile_dir + "/b" + oeis::format_anum(anum).substr(1) + ".txt";
    if (!idx || !std::filesystem::exists(path)) {
      ++skipped;
      continue;
    }
    oeis::BFile bf = oeis::load_bfile(path);
    auto ext = oeis::extension_terms(corpus.terms_of(*idx), bf, extra);
    if (!ext) {
      ++skipped;
      continue;
    }
    ++with_bfile;
    if (interp::covers(rec.program, *ext, interp::Budget::abstract_default())) ++passed;
  }
  std::cout << "checked " << with_bfile << '\n';
  std::cout << "skipped " << skipped << '\n';
  if (with_bfile > 0)
    std::cout << "fraction " << (static_cast<double>(passed) / static_cast<double>(with_bfile))
              << '\n';
  return 0;
}

int cmd_selflearn(const std::string& config_path, const std::string& stripped,
                  const std::string& out_dir) {
  selflearn::GenConfig cfg = selflearn::load_config(config_path);
  oeis::Corpus corpus = load_corpus(stripped);
  std::vector<selflearn::GenStats> stats = selflearn::run(cfg, corpus, out_dir, &std::cerr);
  std::cout << "generation,new,cumulative,generated,tested\n";
  for (const auto& s : stats)
    std::cout << s.generation << ',' << s.new_solutions << ',' << s.cumulative_solutions << ','
              << s.programs_generated << ',' << s.programs_tested << '\n';
  return 0;
}

int cmd_export(const std::string& db_path, const std::string& out_path) {
  selflearn::save_db(selflearn::load_db(db_path), out_path);
  return 0;
}

int cmd_stats(const std::string& stripped, const std::string& db_path) {
  oeis::Corpus corpus = load_corpus(stripped);
  std::cout << "sequences " << corpus.size() << '\n';
  std::cout << "key-uniqueness " << selflearn::key_uniqueness(corpus) << '\n';
  if (!db_path.empty()) {
    selflearn::SolutionDb db = selflearn::load_db(db_path);
    std::cout << "solutions " << db.size() << '\n';
    if (!db.empty()) {
      double total = 0;
      for (const auto& [anum, rec] : db) total += rec.size;
      std::cout << "mean-size " << total / static_cast<double>(db.size()) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"program synthesis for integer sequences"};
  app.require_subcommand(1);

  std::string program_text, stripped, db_path, terms_csv, anum, model_path, bfile_dir;
  std::string config_path, out_path;
  std::uint64_t terms = 10, budget_us = 0, iterations = 10000, millis = 0, seed = 1, extra = 100;
  bool noise = false;

  CLI::App* eval = app.add_subcommand("eval", "evaluate a program as a sequence");
  eval->add_option("--program", program_text, "program text")->required();
  eval->add_option("--terms", terms, "number of terms to print");
  eval->add_option("--budget-us", budget_us, "per-term budget in microseconds (deterministic steps)");

  CLI::App* match = app.add_subcommand("match", "list sequences extending the given terms");
  match->add_option("--stripped", stripped, "sequence file")->required();
  match->add_option("--terms", terms_csv, "comma-separated initial terms")->required();
  match->add_option("--db", db_path, "solution database to annotate matches");

  CLI::App* search = app.add_subcommand("search", "run one policy-guided search for a sequence");
  search->add_option("--stripped", stripped, "sequence file")->required();
  search->add_option("--anum", anum, "target A-number")->required();
  search->add_option("--model", model_path, "policy checkpoint (default: random init)");
  search->add_option("--iterations", iterations, "node expansions");
  search->add_option("--millis", millis, "wall-clock cap in ms (0 = off)");
  search->add_option("--seed", seed, "rng seed");
  search->add_flag("--noise", noise, "mix uniform noise into the policy");

  CLI::App* ingest = app.add_subcommand("ingest", "load and summarize a sequence file");
  ingest->add_option("--stripped", stripped, "sequence file")->required();
  ingest->add_option("--bfiles", bfile_dir, "directory of b-files to cross-check");

  CLI::App* verify = app.add_subcommand("verify", "check solutions against b-file continuations");
  verify->add_option("--stripped", stripped, "sequence file")->required();
  verify->add_option("--db", db_path, "solution database")->required();
  verify->add_option("--bfiles", bfile_dir, "directory of b-files")->required();
  verify->add_option("--extra", extra, "continuation terms to require");

  CLI::App* learn = app.add_subcommand("selflearn", "run the generate/test/train loop");
  learn->add_option("--config", config_path, "key=value config file")->required();
  learn->add_option("--stripped", stripped, "sequence file")->required();
  learn->add_option("--out", out_path, "output directory (resumable)")->required();

  CLI::App* exp = app.add_subcommand("export", "rewrite a solution database in canonical form");
  exp->add_option("--db", db_path, "solution database")->required();
  exp->add_option("--out", out_path, "output path")->required();

  CLI::App* stats = app.add_subcommand("stats", "corpus and database statistics");
  stats->add_option("--stripped", stripped, "sequence file")->required();
  stats->add_option("--db", db_path, "solution database");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) return cmd_eval(program_text, terms, budget_us);
    if (match->parsed()) return cmd_match(stripped, terms_csv, db_path);
    if (search->parsed()) return cmd_search(stripped, anum, model_path, iterations, millis, seed, noise);
    if (ingest->parsed()) return cmd_ingest(stripped, bfile_dir);
    if (verify->parsed()) return cmd_verify(stripped, db_path, bfile_dir, extra);
    if (learn->parsed()) return cmd_selflearn(config_path, stripped, out_path);
    if (exp->parsed()) return cmd_export(db_path, out_path);
    if (stats->parsed()) return cmd_stats(stripped, db_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
