#include "seqsynth/interp.hpp"

#include <stdexcept>

namespace seqsynth::interp {

std::string_view status_name(EvalResult::Status s) {
  switch (s) {
    case EvalResult::Status::Ok: return "ok";
    case EvalResult::Status::Overflow: return "overflow";
    case EvalResult::Status::OutOfBudget: return "budget-exhausted";
    case EvalResult::Status::DivByZero: return "div-by-zero";
    case EvalResult::Status::ComprNegative: return "compr-negative";
  }
  return "unknown";
}

namespace {

struct Abort {
  EvalResult::Status status;
};

}  // namespace

// Evaluation of one term against the session's cumulative allowance. Named
// at namespace scope so the stream can befriend it.
class Evaluator {
 public:
  Evaluator(TermStream& session, std::uint64_t step_limit,
            std::chrono::steady_clock::time_point deadline)
      : session_(session), step_limit_(step_limit), deadline_(deadline) {}

  Int eval(const dsl::Program& p, const Int& x, const Int& y) {
    charge(1);
    switch (p.op()) {
      case dsl::Op::Zero: return Int(0);
      case dsl::Op::One: return Int(1);
      case dsl::Op::Two: return Int(2);
      case dsl::Op::VarX: return x;
      case dsl::Op::VarY: return y;
      case dsl::Op::Add: {
        Int a = eval(p.child(0), x, y);
        Int b = eval(p.child(1), x, y);
        charge_arith(a, b);
        Int r = a + b;
        check_magnitude(r);
        return r;
      }
      case dsl::Op::Sub: {
        Int a = eval(p.child(0), x, y);
        Int b = eval(p.child(1), x, y);
        charge_arith(a, b);
        Int r = a - b;
        check_magnitude(r);
        return r;
      }
      case dsl::Op::Mul: {
        Int a = eval(p.child(0), x, y);
        Int b = eval(p.child(1), x, y);
        charge_arith(a, b);
        Int r = a * b;
        check_magnitude(r);
        return r;
      }
      case dsl::Op::Div: {
        Int a = eval(p.child(0), x, y);
        Int b = eval(p.child(1), x, y);
        if (b == 0) throw Abort{EvalResult::Status::DivByZero};
        charge_arith(a, b);
        Int r;
        mpz_fdiv_q(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
        return r;
      }
      case dsl::Op::Mod: {
        Int a = eval(p.child(0), x, y);
        Int b = eval(p.child(1), x, y);
        if (b == 0) throw Abort{EvalResult::Status::DivByZero};
        charge_arith(a, b);
        // Floor remainder: sign follows the divisor, r = a - b*floor(a/b).
        Int r;
        mpz_fdiv_r(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
        return r;
      }
      case dsl::Op::Cond: {
        // Only the taken branch is evaluated.
        Int a = eval(p.child(0), x, y);
        return a <= 0 ? eval(p.child(1), x, y) : eval(p.child(2), x, y);
      }
      case dsl::Op::Loop: {
        Int a = eval(p.child(1), x, y);
        Int b = eval(p.child(2), x, y);
        if (a <= 0) return b;
        Int u = std::move(b);
        for (Int n(1); n <= a; n += 1) {
          charge(1);
          u = eval(p.child(0), u, n);
        }
        return u;
      }
      case dsl::Op::Loop2: {
        Int a = eval(p.child(2), x, y);
        Int b = eval(p.child(3), x, y);
        Int c = eval(p.child(4), x, y);
        if (a <= 0) return b;
        Int u = std::move(b);
        Int v = std::move(c);
        for (Int n(1); n <= a; n += 1) {
          charge(1);
          Int nu = eval(p.child(0), u, v);
          Int nv = eval(p.child(1), u, v);
          u = std::move(nu);
          v = std::move(nv);
        }
        return u;
      }
      case dsl::Op::Compr: {
        Int a = eval(p.child(1), x, y);
        if (a < 0) throw Abort{EvalResult::Status::ComprNegative};
        return compr_element(p, a);
      }
    }
    throw std::logic_error("unhandled op");
  }

 private:
  // The a-th element (0-based) of the increasing enumeration of
  // {m >= 0 | f(m, 0) <= 0}, resuming the session's earlier scan.
  Int compr_element(const dsl::Program& p, const Int& a) {
    auto& memo = session_.compr_memo_[p.node()];
    // a was magnitude-checked at its producing op, so it fits comfortably
    // in memory as an index bound; the scan budget is the real limiter.
    while (cmp(a, memo.found.size()) >= 0) {
      charge(1);
      Int m = memo.next_candidate;
      memo.next_candidate += 1;
      if (eval(p.child(0), m, kZero) <= 0) memo.found.push_back(std::move(m));
    }
    return memo.found[mpz_get_ui(a.get_mpz_t())];
  }

  static int cmp(const Int& a, std::size_t b) {
    return mpz_cmp_ui(a.get_mpz_t(), static_cast<unsigned long>(b));
  }

  void charge(std::uint64_t cost) {
    session_.steps_ += cost;
    if (session_.budget_.kind == Budget::Kind::AbstractSteps) {
      if (session_.steps_ > step_limit_) throw Abort{EvalResult::Status::OutOfBudget};
    } else if ((++clock_checks_ & 1023) == 0 &&
               std::chrono::steady_clock::now() > deadline_) {
      throw Abort{EvalResult::Status::OutOfBudget};
    }
  }

  void charge_arith(const Int& a, const Int& b) {
    charge((bit_length(a) + bit_length(b)) / 64);
  }

  void check_magnitude(const Int& v) {
    if (exceeds_cap(v)) throw Abort{EvalResult::Status::Overflow};
  }

  TermStream& session_;
  std::uint64_t step_limit_;
  std::chrono::steady_clock::time_point deadline_;
  std::uint64_t clock_checks_ = 0;
  static const Int kZero;
};

const Int Evaluator::kZero = Int(0);

TermStream::TermStream(dsl::Program p, Budget budget)
    : prog_(std::move(p)), budget_(budget) {}

EvalResult TermStream::next() {
  if (failed_) return EvalResult::abort(*failed_);
  if (!started_) {
    start_ = std::chrono::steady_clock::now();
    started_ = true;
  }
  std::uint64_t k = index_;
  std::uint64_t limit = budget_.initial_steps + (k + 1) * budget_.steps_per_term;
  auto deadline = start_ + std::chrono::microseconds(budget_.initial_micros +
                                                     (k + 1) * budget_.micros_per_term);
  Evaluator ev(*this, limit, deadline);
  try {
    Int x(static_cast<unsigned long>(k));
    Int value = ev.eval(prog_, x, Int(0));
    ++index_;
    return EvalResult::of(std::move(value));
  } catch (const Abort& abort) {
    failed_ = abort.status;
    return EvalResult::abort(abort.status);
  }
}

EvalResult eval(const dsl::Program& p, const Int& x, const Int& y, const Budget& budget) {
  TermStream session(p, budget);
  std::uint64_t limit = budget.initial_steps + budget.steps_per_term;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::microseconds(budget.initial_micros + budget.micros_per_term);
  Evaluator ev(session, limit, deadline);
  try {
    return EvalResult::of(ev.eval(p, x, y));
  } catch (const Abort& abort) {
    return EvalResult::abort(abort.status);
  }
}

SequenceResult eval_sequence(const dsl::Program& p, std::size_t n, const Budget& budget) {
  SequenceResult out;
  out.terms.reserve(n);
  TermStream stream(p, budget);
  for (std::size_t i = 0; i < n; ++i) {
    EvalResult r = stream.next();
    if (!r.ok()) {
      out.status = r.status;
      return out;
    }
    out.terms.push_back(std::move(r.value));
  }
  return out;
}

bool covers(const dsl::Program& p, const std::vector<Int>& terms, const Budget& budget) {
  if (p.free_y()) throw std::invalid_argument("program with free y is not a sequence");
  TermStream stream(p, budget);
  for (const Int& t : terms) {
    EvalResult r = stream.next();
    if (!r.ok() || r.value != t) return false;
  }
  return true;
}

}  // namespace seqsynth::interp
