#include "seqsynth/bigint.hpp"

#include "seqsynth/rng.hpp"

namespace seqsynth {

const Int& value_cap() {
  static const Int cap = [] {
    Int c;
    mpz_ui_pow_ui(c.get_mpz_t(), 10, 285);
    return c;
  }();
  return cap;
}

std::uint64_t hash_int(const Int& v) {
  const mpz_srcptr z = v.get_mpz_t();
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  const int sgn = mpz_sgn(z);
  h = rng::splitmix64(h ^ static_cast<std::uint64_t>(sgn + 1));
  const std::size_t limbs = mpz_size(z);
  for (std::size_t i = 0; i < limbs; ++i) {
    h = rng::splitmix64(h ^ static_cast<std::uint64_t>(mpz_getlimbn(z, i)));
  }
  return h;
}

bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  std::size_t i = (text[0] == '-') ? 1 : 0;
  if (i == text.size()) return false;
  for (std::size_t j = i; j < text.size(); ++j) {
    if (text[j] < '0' || text[j] > '9') return false;
  }
  // mpz_set_str needs a NUL-terminated buffer.
  const std::string buf(text);
  return mpz_set_str(out.get_mpz_t(), buf.c_str(), 10) == 0;
}

}  // namespace seqsynth
