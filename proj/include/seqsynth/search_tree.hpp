#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "seqsynth/dsl.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/stack.hpp"
#include "seqsynth/tnn.hpp"

namespace seqsynth::search {

using Dist = std::array<double, dsl::kOpCount>;
using Policy = std::function<Dist(const Stack&)>;

// q' = 0.9 q + 0.1 r with r uniform per action, normalized. Always draws
// one number per action so the rng stream advances the same way whatever
// q looks like.
Dist add_noise(const Dist& q, rng::Engine& rng);

// Tree over partial-program stacks. Each expansion samples actions from
// the policy (masked to legal actions, renormalized, noised once per node
// when enabled) from the root down, and creates the first missing child.
// Every program ever pushed is collected, deduplicated, in creation order.
class SearchTree {
 public:
  SearchTree(Policy policy, bool noise, rng::Engine& rng);
  ~SearchTree();

  // Creates exactly one node; returns its stack.
  const Stack& expand_once();

  std::uint64_t nodes_created() const { return nodes_created_; }
  const std::vector<dsl::Program>& programs() const { return programs_; }
  std::vector<dsl::Program> take_programs() { return std::move(programs_); }

 private:
  struct Node;
  const Dist& distribution(Node& node);

  Policy policy_;
  bool noise_;
  rng::Engine& rng_;
  std::unique_ptr<Node> root_;
  std::uint64_t nodes_created_ = 0;
  std::vector<dsl::Program> programs_;
  std::unordered_set<dsl::Program, dsl::ProgramHash> seen_;
};

struct SearchLimits {
  std::uint64_t iterations = 0;    // 0 = no iteration cap
  std::uint64_t wall_millis = 0;   // 0 = no time cap

  static SearchLimits by_iterations(std::uint64_t n) { return {n, 0}; }
};

struct SearchResult {
  std::vector<dsl::Program> programs;
  std::uint64_t nodes_created = 0;
  std::uint64_t iterations = 0;
};

// One full search for one target: the tree, its embedding caches, and its
// rng stream live and die here. Deterministic for a fixed seed under an
// iteration limit; a wall-clock limit trades that away.
SearchResult run_search(const tnn::Model& model, const tnn::SequenceKey& key,
                        const SearchLimits& limits, bool noise, std::uint64_t seed);

}  // namespace seqsynth::search
