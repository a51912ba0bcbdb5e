#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "seqsynth/dsl.hpp"

namespace seqsynth::search {

// Persistent stack of partial programs, grown in reverse polish order.
// Pushing shares the tail, so sibling search states alias their common
// prefix and a cell pointer keys the stack embedding cache.
class Stack {
 public:
  Stack() = default;

  bool empty() const { return cell_ == nullptr; }
  std::uint32_t depth() const { return cell_ ? cell_->depth : 0; }
  const dsl::Program& top() const { return cell_->prog; }
  Stack below() const { return cell_ ? Stack(cell_->below) : Stack(); }

  // Total node count across all entries; bounds the size of the program a
  // further action could produce.
  std::uint32_t total_size() const { return cell_ ? cell_->total_size : 0; }

  const void* key() const { return cell_.get(); }

  // Pops arity(op) entries as the children (deepest entry is the leftmost
  // child) and pushes the combined program.
  Stack apply_action(dsl::Op op) const;

  // An action is legal when enough operands are available and the combined
  // program stays within the size cap.
  bool action_legal(dsl::Op op) const;
  std::array<bool, dsl::kOpCount> legal_actions() const;

 private:
  struct Cell {
    dsl::Program prog;
    std::shared_ptr<const Cell> below;
    std::uint32_t depth;
    std::uint32_t total_size;
  };

  explicit Stack(std::shared_ptr<const Cell> cell) : cell_(std::move(cell)) {}

  std::shared_ptr<const Cell> cell_;
};

}  // namespace seqsynth::search
