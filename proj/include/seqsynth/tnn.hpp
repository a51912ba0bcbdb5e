#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqsynth/bigint.hpp"
#include "seqsynth/dsl.hpp"
#include "seqsynth/rng.hpp"
#include "seqsynth/stack.hpp"

namespace seqsynth::tnn {

// One neural block per tree constructor: the 14 program operators, the
// list spines for stacks (::p/nil_p), sequences (::i/nil_i) and digit
// chains (::d, digits 0..9), unary minus, the big-integer stand-in, and
// the head joining a stack with a target sequence.
enum class Block : std::uint8_t {
  // 0..13 mirror dsl::Op.
  OpZero, OpOne, OpTwo, OpVarX, OpVarY, OpAdd, OpSub, OpMul, OpDiv, OpMod,
  OpCond, OpLoop, OpLoop2, OpCompr,
  StackCons, StackNil,
  SeqCons, SeqNil,
  DigitCons,
  Digit0, Digit1, Digit2, Digit3, Digit4, Digit5, Digit6, Digit7, Digit8, Digit9,
  Neg, Big,
  Head,
};

inline constexpr int kBlockCount = 32;

// Leaves are learned d-vectors; blocks of arity n are two fully connected
// layers with tanh, n*d -> d -> d.
int block_arity(Block b);
inline bool block_is_leaf(Block b) { return block_arity(b) == 0; }

// Clipped view of a sequence used for embedding and identification: the
// first up-to-16 terms, each term beyond +-10^6 replaced by a sentinel
// that embeds as the `big` leaf.
struct SequenceKey {
  static constexpr std::int64_t kBig = 1000001;

  std::vector<std::int64_t> terms;

  static SequenceKey from_terms(const std::vector<Int>& terms);
  bool operator==(const SequenceKey&) const = default;
};

struct SequenceKeyHash {
  std::size_t operator()(const SequenceKey& k) const;
};

// All weights live in one flat parameter vector so gradient buffers,
// descent updates, and checkpoints are plain array operations. Layout:
// blocks in enum order, then the policy output layer; leaf blocks store d
// values, arity-n blocks store W1 (d x n*d, row major), b1, W2 (d x d),
// b2; the policy layer stores P (14 x d) then its bias.
struct Model {
  int d = 0;
  std::vector<double> params;

  static Model init(int d, std::uint64_t seed);

  std::size_t offset(int block_index) const { return offsets_[static_cast<std::size_t>(block_index)]; }
  std::size_t offset(Block b) const { return offset(static_cast<int>(b)); }
  std::size_t policy_offset() const { return offsets_[kBlockCount]; }
  std::size_t param_count() const { return offsets_[kBlockCount + 1]; }

  const double* block(Block b) const { return params.data() + offset(b); }

 private:
  friend Model load_model(const std::string&);
  void compute_offsets();
  // offsets_[i] = start of block i; [32] = policy layer; [33] = total.
  std::array<std::size_t, kBlockCount + 2> offsets_{};
};

// Versioned binary checkpoint; round-trips bit-exactly. Format: "SQTN",
// u32 version, u32 d, u32 section count, u64 length per section, raw
// doubles. Sections are the 32 blocks plus the policy layer.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

using Vec = std::vector<double>;

// Forward-only embedding evaluator with caches keyed by structural
// identity: integers by clipped value, programs by node, stacks by cell.
// Lives as long as one search tree so shared subtrees are embedded once.
class Embedder {
 public:
  explicit Embedder(const Model& m) : model_(m) {}

  const Vec& embed_int(std::int64_t clipped);
  const Vec& embed_key(const SequenceKey& key);
  const Vec& embed_program(const dsl::Program& p);
  const Vec& embed_stack(const search::Stack& s);

  std::array<double, dsl::kOpCount> forward_policy(const search::Stack& s,
                                                   const SequenceKey& key);

 private:
  const Model& model_;
  std::unordered_map<std::int64_t, Vec> ints_;
  std::unordered_map<SequenceKey, Vec, SequenceKeyHash> keys_;
  std::unordered_map<const dsl::detail::Node*, Vec> programs_;
  std::unordered_map<const void*, Vec> stacks_;
  // Pointer-keyed entries pin their owners so an address can never be
  // reused by a new object while a dead one's embedding is still cached.
  std::vector<dsl::Program> pinned_programs_;
  std::vector<search::Stack> pinned_stacks_;
};

// Uncached convenience; agrees bit-for-bit with an Embedder.
std::array<double, dsl::kOpCount> forward_policy(const Model& m, const search::Stack& s,
                                                 const SequenceKey& key);

// Clips to the +-10^6 window (beyond it only the sign matters) and embeds
// as a base-10 digit list, least significant digit outermost.
std::int64_t clip_int(const Int& v);

struct TrainingExample {
  search::Stack stack;
  dsl::Op action;
};

// One example per construction action of p: the stack before the action,
// and the action taken. Replaying the actions from an empty stack yields p.
std::vector<TrainingExample> extract_examples(const dsl::Program& p);

// A training batch: every example of one sequence-solution pair.
struct TrainPair {
  SequenceKey key;
  dsl::Program program;
};

double batch_loss(const Model& m, const TrainPair& pair);

// Mean cross-entropy over the pair's examples and its gradient; grad must
// have param_count entries and is accumulated into (callers zero it).
double batch_gradient(const Model& m, const TrainPair& pair, std::vector<double>& grad);

// Plain batch gradient descent, one step per pair, pair order reshuffled
// every epoch. Returns the mean batch loss observed during the last epoch.
// Aborts (std::runtime_error) if the loss turns non-finite.
double train(Model& m, const std::vector<TrainPair>& pairs, int epochs, double lr,
             rng::Engine& rng);

}  // namespace seqsynth::tnn
