#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace seqsynth {

// Arbitrary-precision signed integer. GMP handles representation and
// arithmetic; everything semantic (floor division, the value cap, cost
// accounting) lives in the interpreter.
using Int = mpz_class;

// Number of bits in |v|; 0 for v == 0.
inline std::size_t bit_length(const Int& v) {
  if (mpz_sgn(v.get_mpz_t()) == 0) return 0;
  return mpz_sizeinbase(v.get_mpz_t(), 2);
}

// Largest absolute value an evaluation may produce: 10^285.
const Int& value_cap();

inline bool exceeds_cap(const Int& v) {
  return mpz_cmpabs(v.get_mpz_t(), value_cap().get_mpz_t()) > 0;
}

std::uint64_t hash_int(const Int& v);

// Parses an optionally signed decimal integer; returns false on any
// malformed input (empty, stray characters, lone '-').
bool parse_int(std::string_view text, Int& out);

inline std::string to_string(const Int& v) { return v.get_str(); }

}  // namespace seqsynth
