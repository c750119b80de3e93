#pragma once

#include <cstdint>
#include <vector>

namespace orpt::nt {

struct PrimePower {
  std::int64_t prime = 0;
  int exponent = 0;
  bool operator==(const PrimePower&) const = default;
};

/// Canonical factorization, primes strictly increasing. Empty for n = 1.
using Factorization = std::vector<PrimePower>;

/// One period of an integer sequence. Evaluation is periodic and accepts
/// negative arguments.
struct PeriodicIntSequence {
  std::int64_t period = 1;
  std::vector<std::int64_t> values;

  std::int64_t at(std::int64_t n) const {
    std::int64_t m = n % period;
    if (m < 0) m += period;
    return values[static_cast<std::size_t>(m)];
  }
};

std::vector<std::int64_t> divisors(std::int64_t n);
Factorization factorize(std::int64_t n);
std::int64_t totient(std::int64_t n);
std::int64_t mobius(std::int64_t n);
bool is_prime(std::int64_t n);

/// Ramanujan sum c_q(n), one period n = 0..q-1. Computed from the
/// Moebius/totient closed form, so every entry is an exact integer.
PeriodicIntSequence ramanujan_sum(std::int64_t q);

/// Sparse Ramanujan sequence c^k_q(n) for prime q and 0 <= k < q-1,
/// one period n = 0..q-1. Arguments of c_q are reduced mod q.
PeriodicIntSequence sparse_ramanujan(std::int64_t q, std::int64_t k);

}  // namespace orpt::nt
