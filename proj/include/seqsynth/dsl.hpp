#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqsynth::dsl {

// The 14 program constructors. The enum order is the fixed total order used
// for tie-breaking between equally sized programs, and the action index
// order of the policy output.
enum class Op : std::uint8_t {
  Zero,
  One,
  Two,
  VarX,
  VarY,
  Add,
  Sub,
  Mul,
  Div,
  Mod,
  Cond,
  Loop,
  Loop2,
  Compr,
};

inline constexpr int kOpCount = 14;

inline constexpr std::array<Op, kOpCount> all_ops() {
  std::array<Op, kOpCount> ops{};
  for (int i = 0; i < kOpCount; ++i) ops[i] = static_cast<Op>(i);
  return ops;
}

int arity(Op op);
std::string_view op_name(Op op);

// True when `slot` of `op` holds a lambda body: loop's function, both
// functions of loop2, and compr's predicate. Variables inside such a slot
// are bound by the implicit lambda(x, y).
bool higher_order_slot(Op op, int slot);

// Node count of the largest program the library will construct or parse.
inline constexpr std::uint32_t kMaxProgramSize = 10000;

class Program;

namespace detail {
struct Node {
  Op op;
  std::vector<Program> children;
  std::uint32_t size;
  bool free_y;
  std::uint64_t hash;
};
}  // namespace detail

// An immutable operator tree with structural sharing. Copies are cheap
// handle copies; subtree identity (node pointer) is stable, which the
// embedding caches rely on.
class Program {
 public:
  Program() = default;
  static Program leaf(Op op);
  static Program make(Op op, std::vector<Program> children);

  bool valid() const { return node_ != nullptr; }
  Op op() const { return node_->op; }
  int child_count() const { return static_cast<int>(node_->children.size()); }
  const Program& child(int i) const { return node_->children[static_cast<std::size_t>(i)]; }
  std::uint32_t size() const { return node_->size; }
  bool free_y() const { return node_->free_y; }
  std::uint64_t hash() const { return node_->hash; }
  const detail::Node* node() const { return node_.get(); }

  bool operator==(const Program& other) const;

 private:
  explicit Program(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;
};

struct ProgramHash {
  std::size_t operator()(const Program& p) const { return static_cast<std::size_t>(p.hash()); }
};

// Total order: size ascending, ties by the pre-order token sequence under
// the enum order above. Distinct programs never compare equal.
std::strong_ordering compare(const Program& a, const Program& b);

struct ProgramLess {
  bool operator()(const Program& a, const Program& b) const { return compare(a, b) < 0; }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t position)
      : std::runtime_error(std::move(message)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_ = 0;
};

// Grammar: p := "0" | "1" | "2" | "x" | "y" | name "(" p ("," p)* ")" with
// name in {add,sub,mul,div,mod,cond,loop,loop2,compr}; whitespace ignored.
Program parse(std::string_view text);
std::string print(const Program& p);

// Post-order token sequence; replaying it through apply_action from the
// empty stack rebuilds the program.
std::vector<Op> linearize(const Program& p);

}  // namespace seqsynth::dsl
