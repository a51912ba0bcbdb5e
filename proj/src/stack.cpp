#include "seqsynth/stack.hpp"

namespace seqsynth::search {

Stack Stack::apply_action(dsl::Op op) const {
  int n = dsl::arity(op);
  std::vector<dsl::Program> children(static_cast<std::size_t>(n));
  std::shared_ptr<const Cell> rest = cell_;
  for (int i = n - 1; i >= 0; --i) {
    if (!rest) throw std::invalid_argument("stack underflow applying " + std::string(dsl::op_name(op)));
    children[static_cast<std::size_t>(i)] = rest->prog;
    rest = rest->below;
  }
  auto cell = std::make_shared<Cell>();
  cell->prog = dsl::Program::make(op, std::move(children));
  cell->below = rest;
  cell->depth = (rest ? rest->depth : 0) + 1;
  cell->total_size = (rest ? rest->total_size : 0) + cell->prog.size();
  return Stack(std::move(cell));
}

bool Stack::action_legal(dsl::Op op) const {
  int n = dsl::arity(op);
  if (depth() < static_cast<std::uint32_t>(n)) return false;
  // The cap binds the program this action would construct, not the stack as
  // a whole: one new node plus the operands it consumes.
  std::uint64_t sz = 1;
  const Cell* cell = cell_.get();
  for (int i = 0; i < n; ++i) {
    sz += cell->prog.size();
    cell = cell->below.get();
  }
  return sz <= dsl::kMaxProgramSize;
}

std::array<bool, dsl::kOpCount> Stack::legal_actions() const {
  std::array<bool, dsl::kOpCount> mask{};
  for (dsl::Op op : dsl::all_ops()) mask[static_cast<std::size_t>(op)] = action_legal(op);
  return mask;
}

}  // namespace seqsynth::search
