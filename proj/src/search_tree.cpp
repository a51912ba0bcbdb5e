#include "seqsynth/search_tree.hpp"

#include <chrono>
#include <stdexcept>

namespace seqsynth::search {

Dist add_noise(const Dist& q, rng::Engine& rng) {
  Dist r;
  double sum = 0;
  for (double& v : r) {
    v = rng.next_double();
    sum += v;
  }
  Dist out;
  for (int a = 0; a < dsl::kOpCount; ++a) {
    double ra = sum > 0 ? r[static_cast<std::size_t>(a)] / sum
                        : 1.0 / dsl::kOpCount;
    out[static_cast<std::size_t>(a)] = 0.9 * q[static_cast<std::size_t>(a)] + 0.1 * ra;
  }
  return out;
}

struct SearchTree::Node {
  Stack stack;
  std::array<std::unique_ptr<Node>, dsl::kOpCount> children;
  Dist dist;
  bool has_dist = false;
};

SearchTree::SearchTree(Policy policy, bool noise, rng::Engine& rng)
    : policy_(std::move(policy)), noise_(noise), rng_(rng), root_(std::make_unique<Node>()) {}

SearchTree::~SearchTree() = default;

// The distribution a node samples from is fixed the first time the node is
// left through: policy output, illegal actions zeroed, renormalized, and
// (when the search is noised) one dose of noise. Noise can leak mass back
// onto illegal actions, so they are zeroed again after it.
const Dist& SearchTree::distribution(Node& node) {
  if (node.has_dist) return node.dist;
  Dist q = policy_(node.stack);
  std::array<bool, dsl::kOpCount> legal = node.stack.legal_actions();
  auto mask_renorm = [&](Dist& dist) {
    double sum = 0;
    for (int a = 0; a < dsl::kOpCount; ++a) {
      if (!legal[static_cast<std::size_t>(a)]) dist[static_cast<std::size_t>(a)] = 0;
      sum += dist[static_cast<std::size_t>(a)];
    }
    if (sum <= 0) throw std::runtime_error("policy assigns no mass to any legal action");
    for (double& v : dist) v /= sum;
  };
  mask_renorm(q);
  if (noise_) {
    q = add_noise(q, rng_);
    mask_renorm(q);
  }
  node.dist = q;
  node.has_dist = true;
  return node.dist;
}

const Stack& SearchTree::expand_once() {
  Node* node = root_.get();
  for (;;) {
    const Dist& dist = distribution(*node);
    double u = rng_.next_double();
    int action = dsl::kOpCount - 1;
    double acc = 0;
    for (int a = 0; a < dsl::kOpCount; ++a) {
      acc += dist[static_cast<std::size_t>(a)];
      if (u < acc) {
        action = a;
        break;
      }
    }
    // Rounding can push u past the accumulated sum; fall back to the last
    // action with mass.
    while (dist[static_cast<std::size_t>(action)] == 0) --action;

    auto& child = node->children[static_cast<std::size_t>(action)];
    if (!child) {
      child = std::make_unique<Node>();
      child->stack = node->stack.apply_action(static_cast<dsl::Op>(action));
      ++nodes_created_;
      const dsl::Program& made = child->stack.top();
      if (seen_.insert(made).second) programs_.push_back(made);
      return child->stack;
    }
    node = child.get();
  }
}

SearchResult run_search(const tnn::Model& model, const tnn::SequenceKey& key,
                        const SearchLimits& limits, bool noise, std::uint64_t seed) {
  rng::Engine rng(seed);
  tnn::Embedder embedder(model);
  Policy policy = [&](const Stack& s) { return embedder.forward_policy(s, key); };

  SearchTree tree(std::move(policy), noise, rng);
  SearchResult result;
  auto start = std::chrono::steady_clock::now();
  while (limits.iterations == 0 || result.iterations < limits.iterations) {
    if (limits.wall_millis > 0) {
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      if (static_cast<std::uint64_t>(elapsed.count()) >= limits.wall_millis) break;
    }
    if (limits.iterations == 0 && limits.wall_millis == 0) break;  // no budget at all
    tree.expand_once();
    ++result.iterations;
  }
  result.nodes_created = tree.nodes_created();
  result.programs = tree.take_programs();
  return result;
}

}  // namespace seqsynth::search
