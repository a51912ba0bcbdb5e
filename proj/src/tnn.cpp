#include "seqsynth/tnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace seqsynth::tnn {

int block_arity(Block b) {
  switch (b) {
    case Block::OpAdd:
    case Block::OpSub:
    case Block::OpMul:
    case Block::OpDiv:
    case Block::OpMod:
    case Block::OpCompr:
    case Block::StackCons:
    case Block::SeqCons:
    case Block::DigitCons:
    case Block::Head:
      return 2;
    case Block::OpCond:
    case Block::OpLoop:
      return 3;
    case Block::OpLoop2:
      return 5;
    case Block::Neg:
      return 1;
    default:
      return 0;
  }
}

std::int64_t clip_int(const Int& v) {
  static const Int limit(1000000);
  if (v > limit) return SequenceKey::kBig;
  if (v < -limit) return -SequenceKey::kBig;
  return mpz_get_si(v.get_mpz_t());
}

SequenceKey SequenceKey::from_terms(const std::vector<Int>& terms) {
  SequenceKey key;
  std::size_t n = std::min<std::size_t>(terms.size(), 16);
  key.terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) key.terms.push_back(clip_int(terms[i]));
  return key;
}

std::size_t SequenceKeyHash::operator()(const SequenceKey& k) const {
  std::uint64_t h = rng::splitmix64(k.terms.size());
  for (std::int64_t t : k.terms)
    h = rng::splitmix64(h ^ static_cast<std::uint64_t>(t));
  return static_cast<std::size_t>(h);
}

namespace {

std::size_t block_param_count(int d, Block b) {
  std::size_t dd = static_cast<std::size_t>(d);
  int n = block_arity(b);
  if (n == 0) return dd;
  return static_cast<std::size_t>(n) * dd * dd + dd + dd * dd + dd;
}

std::size_t policy_param_count(int d) {
  return static_cast<std::size_t>(dsl::kOpCount) * static_cast<std::size_t>(d) + dsl::kOpCount;
}

}  // namespace

void Model::compute_offsets() {
  std::size_t off = 0;
  for (int i = 0; i < kBlockCount; ++i) {
    offsets_[static_cast<std::size_t>(i)] = off;
    off += block_param_count(d, static_cast<Block>(i));
  }
  offsets_[kBlockCount] = off;
  offsets_[kBlockCount + 1] = off + policy_param_count(d);
}

Model Model::init(int d, std::uint64_t seed) {
  if (d <= 0) throw std::invalid_argument("embedding dimension must be positive");
  Model m;
  m.d = d;
  m.compute_offsets();
  m.params.resize(m.param_count());

  rng::Engine eng(seed);
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i)
      m.params[begin + i] = (2.0 * eng.next_double() - 1.0) * bound;
  };

  std::size_t dd = static_cast<std::size_t>(d);
  for (int i = 0; i < kBlockCount; ++i) {
    Block b = static_cast<Block>(i);
    std::size_t off = m.offset(i);
    int n = block_arity(b);
    if (n == 0) {
      fill(off, dd, dd);
      continue;
    }
    std::size_t nd = static_cast<std::size_t>(n) * dd;
    fill(off, dd * nd + dd, nd);            // W1, b1
    fill(off + dd * nd + dd, dd * dd + dd, dd);  // W2, b2
  }
  fill(m.policy_offset(), policy_param_count(d), dd);
  return m;
}

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void save_model(const Model& m, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path);
  auto put = [&](const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f.get()) != n) throw std::runtime_error("short write to " + path);
  };
  put(kMagic, 4);
  std::uint32_t version = kVersion, d = static_cast<std::uint32_t>(m.d),
                sections = kBlockCount + 1;
  put(&version, 4);
  put(&d, 4);
  put(&sections, 4);
  for (int i = 0; i <= kBlockCount; ++i) {
    std::uint64_t len = (i < kBlockCount ? block_param_count(m.d, static_cast<Block>(i))
                                         : policy_param_count(m.d));
    put(&len, 8);
  }
  put(m.params.data(), m.params.size() * sizeof(double));
}

Model load_model(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot read " + path);
  auto get = [&](void* p, std::size_t n) {
    if (std::fread(p, 1, n, f.get()) != n)
      throw std::runtime_error(path + ": truncated checkpoint");
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a policy checkpoint");
  std::uint32_t version, d, sections;
  get(&version, 4);
  get(&d, 4);
  get(&sections, 4);
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  if (d == 0 || d > 4096 || sections != kBlockCount + 1)
    throw std::runtime_error(path + ": corrupt checkpoint header");

  Model m;
  m.d = static_cast<int>(d);
  m.compute_offsets();
  for (int i = 0; i <= kBlockCount; ++i) {
    std::uint64_t len;
    get(&len, 8);
    std::uint64_t want = (i < kBlockCount ? block_param_count(m.d, static_cast<Block>(i))
                                          : policy_param_count(m.d));
    if (len != want) throw std::runtime_error(path + ": checkpoint dimension mismatch");
  }
  m.params.resize(m.param_count());
  get(m.params.data(), m.params.size() * sizeof(double));
  char extra;
  if (std::fread(&extra, 1, 1, f.get()) == 1)
    throw std::runtime_error(path + ": trailing data in checkpoint");
  return m;
}

namespace {

// Two tanh layers over the concatenated children. Writes the hidden layer
// when the caller keeps it for backprop.
void block_forward(const Model& m, Block b, const Vec* const* children, Vec& out, Vec* h1_out) {
  int d = m.d;
  int n = block_arity(b);
  std::size_t dd = static_cast<std::size_t>(d);
  const double* base = m.block(b);

  if (n == 0) {
    out.assign(base, base + dd);
    return;
  }
  std::size_t nd = static_cast<std::size_t>(n) * dd;
  const double* w1 = base;
  const double* b1 = base + dd * nd;
  const double* w2 = b1 + dd;
  const double* b2 = w2 + dd * dd;

  Vec h1(dd);
  for (std::size_t i = 0; i < dd; ++i) {
    double acc = b1[i];
    const double* row = w1 + i * nd;
    for (int c = 0; c < n; ++c) {
      const Vec& child = *children[c];
      const double* seg = row + static_cast<std::size_t>(c) * dd;
      for (std::size_t j = 0; j < dd; ++j) acc += seg[j] * child[j];
    }
    h1[i] = std::tanh(acc);
  }
  out.resize(dd);
  for (std::size_t i = 0; i < dd; ++i) {
    double acc = b2[i];
    const double* row = w2 + i * dd;
    for (std::size_t j = 0; j < dd; ++j) acc += row[j] * h1[j];
    out[i] = std::tanh(acc);
  }
  if (h1_out) *h1_out = std::move(h1);
}

std::array<double, dsl::kOpCount> policy_softmax(const Model& m, const Vec& head_out) {
  std::size_t dd = static_cast<std::size_t>(m.d);
  const double* p = m.params.data() + m.policy_offset();
  const double* pb = p + static_cast<std::size_t>(dsl::kOpCount) * dd;
  std::array<double, dsl::kOpCount> logits{};
  for (int a = 0; a < dsl::kOpCount; ++a) {
    double acc = pb[a];
    const double* row = p + static_cast<std::size_t>(a) * dd;
    for (std::size_t j = 0; j < dd; ++j) acc += row[j] * head_out[j];
    logits[static_cast<std::size_t>(a)] = acc;
  }
  double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double& l : logits) {
    l = std::exp(l - hi);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

Block block_of_op(dsl::Op op) { return static_cast<Block>(static_cast<int>(op)); }

}  // namespace

const Vec& Embedder::embed_int(std::int64_t clipped) {
  auto it = ints_.find(clipped);
  if (it != ints_.end()) return it->second;

  Vec out;
  std::int64_t mag = clipped < 0 ? -clipped : clipped;
  if (mag > 1000000) {
    block_forward(model_, Block::Big, nullptr, out, nullptr);
  } else {
    // Digit list, least significant digit outermost: fold from the most
    // significant digit, consing each next digit on as the new head.
    char buf[8];
    int len = std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(mag));
    auto digit_block = [&](char c) { return static_cast<Block>(static_cast<int>(Block::Digit0) + (c - '0')); };
    block_forward(model_, digit_block(buf[0]), nullptr, out, nullptr);
    for (int i = 1; i < len; ++i) {
      Vec digit, next;
      block_forward(model_, digit_block(buf[i]), nullptr, digit, nullptr);
      const Vec* children[2] = {&digit, &out};
      block_forward(model_, Block::DigitCons, children, next, nullptr);
      out = std::move(next);
    }
  }
  if (clipped < 0) {
    Vec neg;
    const Vec* children[1] = {&out};
    block_forward(model_, Block::Neg, children, neg, nullptr);
    out = std::move(neg);
  }
  return ints_.emplace(clipped, std::move(out)).first->second;
}

const Vec& Embedder::embed_key(const SequenceKey& key) {
  auto it = keys_.find(key);
  if (it != keys_.end()) return it->second;

  // Right fold with ::i so the first term ends up outermost.
  Vec acc;
  block_forward(model_, Block::SeqNil, nullptr, acc, nullptr);
  for (std::size_t i = key.terms.size(); i-- > 0;) {
    const Vec& term = embed_int(key.terms[i]);
    Vec next;
    const Vec* children[2] = {&term, &acc};
    block_forward(model_, Block::SeqCons, children, next, nullptr);
    acc = std::move(next);
  }
  return keys_.emplace(key, std::move(acc)).first->second;
}

const Vec& Embedder::embed_program(const dsl::Program& p) {
  auto it = programs_.find(p.node());
  if (it != programs_.end()) return it->second;

  Vec out;
  int n = p.child_count();
  if (n == 0) {
    block_forward(model_, block_of_op(p.op()), nullptr, out, nullptr);
  } else {
    const Vec* children[5];
    for (int i = 0; i < n; ++i) children[i] = &embed_program(p.child(i));
    block_forward(model_, block_of_op(p.op()), children, out, nullptr);
  }
  pinned_programs_.push_back(p);
  return programs_.emplace(p.node(), std::move(out)).first->second;
}

const Vec& Embedder::embed_stack(const search::Stack& s) {
  auto it = stacks_.find(s.key());
  if (it != stacks_.end()) return it->second;

  // Top of stack outermost, ending in nil_p.
  Vec out;
  if (s.empty()) {
    block_forward(model_, Block::StackNil, nullptr, out, nullptr);
  } else {
    const Vec* children[2] = {&embed_program(s.top()), &embed_stack(s.below())};
    block_forward(model_, Block::StackCons, children, out, nullptr);
  }
  pinned_stacks_.push_back(s);
  return stacks_.emplace(s.key(), std::move(out)).first->second;
}

std::array<double, dsl::kOpCount> Embedder::forward_policy(const search::Stack& s,
                                                           const SequenceKey& key) {
  const Vec* children[2] = {&embed_stack(s), &embed_key(key)};
  Vec head;
  block_forward(model_, Block::Head, children, head, nullptr);
  return policy_softmax(model_, head);
}

std::array<double, dsl::kOpCount> forward_policy(const Model& m, const search::Stack& s,
                                                 const SequenceKey& key) {
  Embedder fresh(m);
  return fresh.forward_policy(s, key);
}

std::vector<TrainingExample> extract_examples(const dsl::Program& p) {
  std::vector<dsl::Op> actions = dsl::linearize(p);
  std::vector<TrainingExample> out;
  out.reserve(actions.size());
  search::Stack s;
  for (dsl::Op a : actions) {
    out.push_back({s, a});
    s = s.apply_action(a);
  }
  return out;
}

namespace {

// Shared-subtree computation graph for one batch. Nodes are created
// children-first, so a reverse sweep is a valid backward order, and the
// caches make every shared subtree (the key, repeated stack tails,
// repeated subprograms) a single node whose gradient accumulates.
class Tape {
 public:
  explicit Tape(const Model& m) : model_(m) { leaf_idx_.fill(-1); }

  int leaf(Block b) {
    int& idx = leaf_idx_[static_cast<std::size_t>(b)];
    if (idx < 0) idx = make_node(b, nullptr, 0);
    return idx;
  }

  int apply(Block b, const int* children, int n) { return make_node(b, children, n); }

  int embed_int(std::int64_t clipped) {
    auto it = ints_.find(clipped);
    if (it != ints_.end()) return it->second;
    std::int64_t mag = clipped < 0 ? -clipped : clipped;
    int idx;
    if (mag > 1000000) {
      idx = leaf(Block::Big);
    } else {
      char buf[8];
      int len = std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(mag));
      idx = leaf(static_cast<Block>(static_cast<int>(Block::Digit0) + (buf[0] - '0')));
      for (int i = 1; i < len; ++i) {
        int digit = leaf(static_cast<Block>(static_cast<int>(Block::Digit0) + (buf[i] - '0')));
        int children[2] = {digit, idx};
        idx = apply(Block::DigitCons, children, 2);
      }
    }
    if (clipped < 0) {
      int children[1] = {idx};
      idx = apply(Block::Neg, children, 1);
    }
    ints_.emplace(clipped, idx);
    return idx;
  }

  int embed_key(const SequenceKey& key) {
    int idx = leaf(Block::SeqNil);
    for (std::size_t i = key.terms.size(); i-- > 0;) {
      int children[2] = {embed_int(key.terms[i]), idx};
      idx = apply(Block::SeqCons, children, 2);
    }
    return idx;
  }

  int embed_program(const dsl::Program& p) {
    auto it = programs_.find(p.node());
    if (it != programs_.end()) return it->second;
    int idx;
    int n = p.child_count();
    if (n == 0) {
      idx = leaf(block_of_op(p.op()));
    } else {
      int children[5];
      for (int i = 0; i < n; ++i) children[i] = embed_program(p.child(i));
      idx = apply(block_of_op(p.op()), children, n);
    }
    programs_.emplace(p.node(), idx);
    return idx;
  }

  int embed_stack(const search::Stack& s) {
    if (s.empty()) return leaf(Block::StackNil);
    auto it = stacks_.find(s.key());
    if (it != stacks_.end()) return it->second;
    int children[2] = {embed_program(s.top()), embed_stack(s.below())};
    int idx = apply(Block::StackCons, children, 2);
    stacks_.emplace(s.key(), idx);
    return idx;
  }

  const Vec& out(int idx) const { return nodes_[static_cast<std::size_t>(idx)].out; }
  Vec& grad(int idx) {
    TapeNode& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.g.empty()) n.g.assign(static_cast<std::size_t>(model_.d), 0.0);
    return n.g;
  }

  // Propagates every accumulated output gradient down to the parameters.
  void backward(std::vector<double>& grad_params) {
    std::size_t dd = static_cast<std::size_t>(model_.d);
    Vec dpre2(dd), gh1(dd), dpre1(dd);
    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
      TapeNode& node = nodes_[idx];
      if (node.g.empty()) continue;
      std::size_t off = model_.offset(node.block);
      if (node.nchild == 0) {
        for (std::size_t i = 0; i < dd; ++i) grad_params[off + i] += node.g[i];
        continue;
      }
      std::size_t nd = static_cast<std::size_t>(node.nchild) * dd;
      const double* base = model_.params.data() + off;
      const double* w1 = base;
      const double* w2 = base + dd * nd + dd;
      double* gw1 = grad_params.data() + off;
      double* gb1 = gw1 + dd * nd;
      double* gw2 = gb1 + dd;
      double* gb2 = gw2 + dd * dd;

      for (std::size_t i = 0; i < dd; ++i)
        dpre2[i] = node.g[i] * (1.0 - node.out[i] * node.out[i]);
      std::fill(gh1.begin(), gh1.end(), 0.0);
      for (std::size_t i = 0; i < dd; ++i) {
        gb2[i] += dpre2[i];
        const double* row = w2 + i * dd;
        double* grow = gw2 + i * dd;
        for (std::size_t j = 0; j < dd; ++j) {
          grow[j] += dpre2[i] * node.h1[j];
          gh1[j] += row[j] * dpre2[i];
        }
      }
      for (std::size_t i = 0; i < dd; ++i) {
        dpre1[i] = gh1[i] * (1.0 - node.h1[i] * node.h1[i]);
        gb1[i] += dpre1[i];
      }
      for (int c = 0; c < node.nchild; ++c) {
        Vec& cg = grad(node.child[static_cast<std::size_t>(c)]);
        const Vec& cout = out(node.child[static_cast<std::size_t>(c)]);
        for (std::size_t i = 0; i < dd; ++i) {
          const double* row = w1 + i * nd + static_cast<std::size_t>(c) * dd;
          double* grow = gw1 + i * nd + static_cast<std::size_t>(c) * dd;
          double di = dpre1[i];
          for (std::size_t j = 0; j < dd; ++j) {
            grow[j] += di * cout[j];
            cg[j] += row[j] * di;
          }
        }
      }
    }
  }

 private:
  struct TapeNode {
    Block block;
    std::array<int, 5> child;
    int nchild;
    Vec h1;
    Vec out;
    Vec g;
  };

  int make_node(Block b, const int* children, int n) {
    TapeNode node;
    node.block = b;
    node.nchild = n;
    const Vec* child_out[5];
    for (int i = 0; i < n; ++i) {
      node.child[static_cast<std::size_t>(i)] = children[i];
      child_out[i] = &nodes_[static_cast<std::size_t>(children[i])].out;
    }
    block_forward(model_, b, n > 0 ? child_out : nullptr, node.out, n > 0 ? &node.h1 : nullptr);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Model& model_;
  std::vector<TapeNode> nodes_;
  std::array<int, kBlockCount> leaf_idx_;
  std::unordered_map<std::int64_t, int> ints_;
  std::unordered_map<const dsl::detail::Node*, int> programs_;
  std::unordered_map<const void*, int> stacks_;
};

struct BatchForward {
  Tape tape;
  double loss = 0;
  struct Example {
    int head;
    std::array<double, dsl::kOpCount> probs;
    int action;
  };
  std::vector<Example> examples;

  BatchForward(const Model& m, const TrainPair& pair) : tape(m) {
    std::vector<TrainingExample> xs = extract_examples(pair.program);
    int key = tape.embed_key(pair.key);
    examples.reserve(xs.size());
    for (const TrainingExample& x : xs) {
      int children[2] = {tape.embed_stack(x.stack), key};
      int head = tape.apply(Block::Head, children, 2);
      auto probs = policy_softmax(m, tape.out(head));
      int action = static_cast<int>(x.action);
      loss -= std::log(probs[static_cast<std::size_t>(action)]);
      examples.push_back({head, probs, action});
    }
    if (!examples.empty()) loss /= static_cast<double>(examples.size());
  }
};

}  // namespace

double batch_loss(const Model& m, const TrainPair& pair) {
  return BatchForward(m, pair).loss;
}

double batch_gradient(const Model& m, const TrainPair& pair, std::vector<double>& grad) {
  if (grad.size() != m.param_count())
    throw std::invalid_argument("gradient buffer size mismatch");
  BatchForward fwd(m, pair);
  if (fwd.examples.empty()) return fwd.loss;

  std::size_t dd = static_cast<std::size_t>(m.d);
  const double* p = m.params.data() + m.policy_offset();
  double* gp = grad.data() + m.policy_offset();
  double* gpb = gp + static_cast<std::size_t>(dsl::kOpCount) * dd;
  double scale = 1.0 / static_cast<double>(fwd.examples.size());

  for (const auto& ex : fwd.examples) {
    const Vec& head_out = fwd.tape.out(ex.head);
    Vec& head_grad = fwd.tape.grad(ex.head);
    for (int a = 0; a < dsl::kOpCount; ++a) {
      double dlogit = (ex.probs[static_cast<std::size_t>(a)] - (a == ex.action ? 1.0 : 0.0)) * scale;
      gpb[a] += dlogit;
      const double* row = p + static_cast<std::size_t>(a) * dd;
      double* grow = gp + static_cast<std::size_t>(a) * dd;
      for (std::size_t j = 0; j < dd; ++j) {
        grow[j] += dlogit * head_out[j];
        head_grad[j] += row[j] * dlogit;
      }
    }
  }
  fwd.tape.backward(grad);
  return fwd.loss;
}

double train(Model& m, const std::vector<TrainPair>& pairs, int epochs, double lr,
             rng::Engine& rng) {
  if (pairs.empty() || epochs <= 0) return 0.0;
  std::vector<double> grad(m.param_count());
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double last_epoch_loss = 0.0;
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    double total = 0.0;
    for (std::size_t idx : order) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = batch_gradient(m, pairs[idx], grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss on batch " +
                                 std::to_string(idx) + " in epoch " + std::to_string(e));
      for (std::size_t k = 0; k < grad.size(); ++k) m.params[k] -= lr * grad[k];
      total += loss;
    }
    last_epoch_loss = total / static_cast<double>(pairs.size());
  }
  return last_epoch_loss;
}

}  // namespace seqsynth::tnn
