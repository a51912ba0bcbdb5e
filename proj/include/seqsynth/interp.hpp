#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqsynth/bigint.hpp"
#include "seqsynth/dsl.hpp"

namespace seqsynth::interp {

// Evaluation effort limit. Abstract step counting is the default because it
// is deterministic across machines and runs; wall-clock limits exist for
// interactive use but make outcomes machine-dependent.
struct Budget {
  enum class Kind { AbstractSteps, WallClock };
  Kind kind = Kind::AbstractSteps;

  // AbstractSteps: cumulative limit while computing term k (0-based) is
  // initial_steps + (k+1)*steps_per_term.
  std::uint64_t initial_steps = 10000;
  std::uint64_t steps_per_term = 10000;

  // WallClock: same shape, in microseconds.
  std::uint64_t initial_micros = 50;
  std::uint64_t micros_per_term = 50;

  static Budget abstract_default() { return Budget{}; }
  static Budget abstract_steps(std::uint64_t initial, std::uint64_t per_term) {
    Budget b;
    b.initial_steps = initial;
    b.steps_per_term = per_term;
    return b;
  }
  static Budget wall_clock(std::uint64_t initial_micros, std::uint64_t micros_per_term) {
    Budget b;
    b.kind = Kind::WallClock;
    b.initial_micros = initial_micros;
    b.micros_per_term = micros_per_term;
    return b;
  }
};

struct EvalResult {
  enum class Status { Ok, Overflow, OutOfBudget, DivByZero, ComprNegative };
  Status status = Status::Ok;
  Int value;

  bool ok() const { return status == Status::Ok; }
  static EvalResult of(Int v) { return EvalResult{Status::Ok, std::move(v)}; }
  static EvalResult abort(Status s) { return EvalResult{s, Int(0)}; }
};

std::string_view status_name(EvalResult::Status s);

// Lazily produces p(0,0), p(1,0), p(2,0), ... within one budget session.
// Each requested term raises the cumulative step allowance, and the compr
// scan cache carries over between terms, so cost depends only on the budget
// schedule and the prefix of terms computed. Any failure is sticky: the
// stream never produces another term after one aborts.
class TermStream {
 public:
  TermStream(dsl::Program p, Budget budget);

  EvalResult next();
  std::uint64_t terms_produced() const { return index_; }
  std::uint64_t steps_used() const { return steps_; }

 private:
  friend class Evaluator;
  dsl::Program prog_;
  Budget budget_;
  std::uint64_t index_ = 0;
  std::uint64_t steps_ = 0;
  std::chrono::steady_clock::time_point start_;
  bool started_ = false;
  std::optional<EvalResult::Status> failed_;

  // Scan state of one compr node within this session. Found elements are the
  // increasing m >= 0 with predicate(m, 0) <= 0; next_candidate is where the
  // scan resumes. Reusable across terms because the predicate sees only its
  // own lambda bindings, never the enclosing ones.
  struct ComprMemo {
    std::vector<Int> found;
    Int next_candidate = 0;
  };
  std::unordered_map<const dsl::detail::Node*, ComprMemo> compr_memo_;
};

// One-shot evaluation of p(x, y) with a single term's allowance.
EvalResult eval(const dsl::Program& p, const Int& x, const Int& y, const Budget& budget);

struct SequenceResult {
  std::vector<Int> terms;
  EvalResult::Status status = EvalResult::Status::Ok;  // Ok iff all n terms produced

  bool ok() const { return status == EvalResult::Status::Ok; }
};

// First n terms of p, stopping at the first failure.
SequenceResult eval_sequence(const dsl::Program& p, std::size_t n, const Budget& budget);

// True when the stream reproduces every given term. Programs with a free y
// are not functions of the index and are rejected outright.
bool covers(const dsl::Program& p, const std::vector<Int>& terms, const Budget& budget);

}  // namespace seqsynth::interp
