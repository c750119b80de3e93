#include "orpt/numtheory.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace orpt::nt {

namespace {
void require_positive(std::int64_t n, const char* what) {
  if (n < 1) throw std::domain_error(std::string(what) + ": argument must be positive");
}
}  // namespace

std::vector<std::int64_t> divisors(std::int64_t n) {
  require_positive(n, "divisors");
  if (n > (std::int64_t{1} << 31)) throw std::domain_error("divisors: argument too large");
  std::vector<std::int64_t> small, large;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d == 0) {
      small.push_back(d);
      if (d != n / d) large.push_back(n / d);
    }
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

Factorization factorize(std::int64_t n) {
  require_positive(n, "factorize");
  Factorization f;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    if (n % p == 0) {
      int r = 0;
      while (n % p == 0) {
        n /= p;
        ++r;
      }
      f.push_back({p, r});
    }
  }
  if (n > 1) f.push_back({n, 1});
  return f;
}

std::int64_t totient(std::int64_t n) {
  require_positive(n, "totient");
  std::int64_t phi = n;
  for (const auto& [p, r] : factorize(n)) phi = phi / p * (p - 1);
  return phi;
}

std::int64_t mobius(std::int64_t n) {
  require_positive(n, "mobius");
  auto f = factorize(n);
  for (const auto& [p, r] : f)
    if (r > 1) return 0;
  return f.size() % 2 == 0 ? 1 : -1;
}

bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  for (std::int64_t p = 2; p * p <= n; ++p)
    if (n % p == 0) return false;
  return true;
}

PeriodicIntSequence ramanujan_sum(std::int64_t q) {
  require_positive(q, "ramanujan_sum");
  PeriodicIntSequence seq;
  seq.period = q;
  seq.values.resize(static_cast<std::size_t>(q));
  const std::int64_t phi_q = totient(q);
  for (std::int64_t n = 0; n < q; ++n) {
    const std::int64_t g = std::gcd(n, q);
    const std::int64_t m = q / g;
    // c_q(n) = mu(q/g) * phi(q) / phi(q/g), g = gcd(n, q)
    seq.values[static_cast<std::size_t>(n)] = mobius(m) * (phi_q / totient(m));
  }
  return seq;
}

PeriodicIntSequence sparse_ramanujan(std::int64_t q, std::int64_t k) {
  if (!is_prime(q)) throw std::domain_error("sparse_ramanujan: q must be prime");
  if (k < 0 || k >= q - 1) throw std::domain_error("sparse_ramanujan: k out of range");
  const PeriodicIntSequence cq = ramanujan_sum(q);
  PeriodicIntSequence seq;
  seq.period = q;
  seq.values.resize(static_cast<std::size_t>(q));
  for (std::int64_t n = 0; n < q; ++n) {
    std::int64_t v = 0;
    if (n >= k) v = cq.at(n - k);   // u((n mod q) - k) gate
    if (n == k) v -= k;             // -k * delta((n mod q) - k)
    seq.values[static_cast<std::size_t>(n)] = v;
  }
  return seq;
}

}  // namespace orpt::nt
