#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "seqsynth/interp.hpp"
#include "seqsynth/oeis.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/search_tree.hpp"
#include "seqsynth/tnn.hpp"

namespace seqsynth::selflearn {

enum class Selection { Smallest, Random };

struct GenConfig {
  std::uint32_t targets_per_gen = 160;
  std::uint32_t searches_parallel = 16;
  // Search effort per target: a node-expansion count (deterministic) or a
  // wall-clock cap; exactly one should be nonzero.
  std::uint64_t search_iterations = 4000;
  std::uint64_t search_millis = 0;
  double noise_fraction = 0.5;
  std::uint32_t generations = 1;
  std::uint64_t seed = 1;
  Selection selection = Selection::Smallest;

  // Policy training. fresh_model restarts from random weights every
  // generation; the alternative continues the previous weights.
  bool fresh_model = true;
  int embed_dim = 64;
  int train_epochs = 50;
  double learning_rate = 1e-2;

  // Interpreter budget used by the test phase.
  std::uint64_t budget_initial_steps = 10000;
  std::uint64_t budget_steps_per_term = 10000;

  interp::Budget budget() const {
    return interp::Budget::abstract_steps(budget_initial_steps, budget_steps_per_term);
  }

  void validate() const;  // throws std::invalid_argument on bad values
};

// key=value lines, '#' comments. Unknown keys are errors. The environment
// variable SEQSYNTH_SEED, when set, overrides the seed.
GenConfig load_config(const std::string& path);

struct SolutionRecord {
  dsl::Program program;
  std::uint32_t size = 0;
  std::uint32_t generation_found = 0;
  std::uint32_t generation_improved = 0;
};

// Solutions keyed by A-number; ordered so persistence is sorted and diffs
// are stable.
using SolutionDb = std::map<std::uint32_t, SolutionRecord>;

// Line format: `A<number> <size> <generation-found> <program>`.
void save_db(const SolutionDb& db, const std::string& path);
SolutionDb load_db(const std::string& path);

struct GenStats {
  std::uint32_t generation = 0;
  std::uint64_t new_solutions = 0;
  std::uint64_t cumulative_solutions = 0;
  std::uint64_t programs_generated = 0;
  std::uint64_t programs_tested = 0;
  // Solutions for sequences that were not this generation's targets. Kept
  // out of the CSV, which stays at the five columns above.
  std::uint64_t hindsight_new = 0;
};

void save_stats(const std::vector<GenStats>& stats, const std::string& path);
std::vector<GenStats> load_stats(const std::string& path);

// n uniform draws with replacement; returns corpus indices.
std::vector<std::size_t> select_targets(const oeis::Corpus& corpus, std::size_t n,
                                        rng::Engine& rng);

// One search per target, noise on for a noise_fraction share (spread
// evenly), up to searches_parallel at once. Workers get seed-derived rng
// streams and write into per-target slots, so results do not depend on the
// degree of parallelism. A failed search is logged and dropped.
struct GenerateResult {
  std::vector<dsl::Program> programs;  // deduplicated union
  std::uint64_t generated = 0;         // union size before any filtering
};
GenerateResult generate_phase(const tnn::Model& model, const oeis::Corpus& corpus,
                              const std::vector<std::size_t>& targets, const GenConfig& cfg,
                              std::uint32_t generation, std::ostream* log);

// Filters out programs with a free y, tests the rest against the trie
// smallest-first, and updates the database: under Smallest a record is
// replaced when the candidate precedes it in the size-then-structure
// order; under Random each covered sequence keeps a uniformly random
// choice among this generation's covering programs.
struct TestResult {
  std::uint64_t tested = 0;
  std::uint64_t new_solutions = 0;
  std::uint64_t hindsight_new = 0;
};
TestResult test_phase(std::vector<dsl::Program> programs, const oeis::Corpus& corpus,
                      const oeis::SeqTrie& trie, SolutionDb& db, const GenConfig& cfg,
                      std::uint32_t generation,
                      const std::unordered_set<std::uint32_t>& target_anums,
                      rng::Engine& rng);

// Builds (sequence key, program) pairs from the whole database and trains
// a model: fresh weights each generation by default, or continuing from
// `previous`. The database must not be empty.
tnn::Model train_phase(const SolutionDb& db, const oeis::Corpus& corpus, const GenConfig& cfg,
                       std::uint32_t generation, const tnn::Model* previous);

// The generate→test→train loop. Runs generations 0..cfg.generations
// inclusive (generations=0 runs nothing); persists the database, model
// checkpoint, stats, and a state marker into out_dir after each
// generation, and resumes from whatever is there.
std::vector<GenStats> run(const GenConfig& cfg, const oeis::Corpus& corpus,
                          const std::string& out_dir, std::ostream* log);

// Fraction of corpus sequences whose clipped 16-term key no other sequence
// shares.
double key_uniqueness(const oeis::Corpus& corpus);

}  // namespace seqsynth::selflearn
