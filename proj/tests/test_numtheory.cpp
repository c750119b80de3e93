#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "orpt/numtheory.hpp"

using namespace orpt;

namespace {

// Independent oracle: evaluate the trigonometric sum over residues coprime
// to q and round, checking that the imaginary part is negligible.
std::int64_t ramanujan_oracle(std::int64_t q, std::int64_t n) {
  std::complex<double> acc;
  for (std::int64_t k = 1; k <= q; ++k) {
    if (std::gcd(k, q) != 1) continue;
    const double ang = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) /
                       static_cast<double>(q);
    acc += std::complex<double>(std::cos(ang), std::sin(ang));
  }
  CHECK(std::abs(acc.imag()) < 1e-6);
  const double rounded = std::round(acc.real());
  CHECK(std::abs(acc.real() - rounded) < 1e-6);
  return static_cast<std::int64_t>(rounded);
}

std::int64_t totient_oracle(std::int64_t n) {
  std::int64_t c = 0;
  for (std::int64_t k = 1; k <= n; ++k)
    if (std::gcd(k, n) == 1) ++c;
  return c;
}

}  // namespace

TEST_CASE("divisors examples") {
  CHECK(nt::divisors(1) == std::vector<std::int64_t>{1});
  CHECK(nt::divisors(28) == std::vector<std::int64_t>{1, 2, 4, 7, 14, 28});
  CHECK(nt::divisors(32) == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32});
  CHECK_THROWS_AS(nt::divisors(0), std::domain_error);
  CHECK_THROWS_AS(nt::divisors(-3), std::domain_error);
}

TEST_CASE("totient examples and brute-force oracle") {
  CHECK(nt::totient(1) == 1);
  CHECK(nt::totient(6) == 2);
  CHECK(nt::totient(9) == 6);
  CHECK_THROWS_AS(nt::totient(0), std::domain_error);
  for (std::int64_t n = 1; n <= 300; ++n) CHECK(nt::totient(n) == totient_oracle(n));
}

TEST_CASE("factorize examples") {
  CHECK(nt::factorize(6) == nt::Factorization{{2, 1}, {3, 1}});
  CHECK(nt::factorize(28) == nt::Factorization{{2, 2}, {7, 1}});
  CHECK(nt::factorize(1).empty());
  CHECK_THROWS_AS(nt::factorize(0), std::domain_error);
  for (std::int64_t n = 2; n <= 500; ++n) {
    std::int64_t prod = 1;
    std::int64_t last = 0;
    for (const auto& pp : nt::factorize(n)) {
      CHECK(nt::is_prime(pp.prime));
      CHECK(pp.prime > last);
      last = pp.prime;
      for (int e = 0; e < pp.exponent; ++e) prod *= pp.prime;
    }
    CHECK(prod == n);
  }
}

TEST_CASE("ramanujan_sum examples") {
  CHECK(nt::ramanujan_sum(1).values == std::vector<std::int64_t>{1});
  CHECK(nt::ramanujan_sum(3).values == std::vector<std::int64_t>{2, -1, -1});
  CHECK(nt::ramanujan_sum(6).values == std::vector<std::int64_t>{2, 1, -1, -2, -1, 1});
  CHECK_THROWS_AS(nt::ramanujan_sum(0), std::domain_error);
}

TEST_CASE("ramanujan_sum matches the exponential-sum oracle") {
  for (std::int64_t q = 1; q <= 60; ++q) {
    const auto seq = nt::ramanujan_sum(q);
    REQUIRE(seq.period == q);
    REQUIRE(seq.values.size() == static_cast<std::size_t>(q));
    for (std::int64_t n = 0; n < q; ++n) CHECK(seq.at(n) == ramanujan_oracle(q, n));
  }
}

TEST_CASE("periodic evaluation handles negative arguments") {
  const auto c3 = nt::ramanujan_sum(3);
  CHECK(c3.at(-1) == c3.at(2));
  CHECK(c3.at(-3) == c3.at(0));
  CHECK(c3.at(7) == c3.at(1));
}

TEST_CASE("period sum and value at zero, q <= 200") {
  for (std::int64_t q = 1; q <= 200; ++q) {
    const auto seq = nt::ramanujan_sum(q);
    const std::int64_t sum =
        std::accumulate(seq.values.begin(), seq.values.end(), std::int64_t{0});
    if (q > 1) CHECK(sum == 0);
    CHECK(seq.at(0) == nt::totient(q));
  }
}

TEST_CASE("divisor totient sums to n, n <= 5000") {
  for (std::int64_t n = 1; n <= 5000; ++n) {
    std::int64_t sum = 0;
    for (std::int64_t d : nt::divisors(n)) sum += nt::totient(d);
    CHECK(sum == n);
  }
}

TEST_CASE("multiplicativity over coprime moduli <= 50") {
  for (std::int64_t q1 = 1; q1 <= 50; ++q1) {
    for (std::int64_t q2 = q1 + 1; q2 <= 50; ++q2) {
      if (std::gcd(q1, q2) != 1) continue;
      const auto a = nt::ramanujan_sum(q1);
      const auto b = nt::ramanujan_sum(q2);
      const auto ab = nt::ramanujan_sum(q1 * q2);
      for (std::int64_t n = 0; n < q1 * q2; ++n) CHECK(ab.at(n) == a.at(n) * b.at(n));
    }
  }
}

TEST_CASE("sparse_ramanujan examples") {
  CHECK(nt::sparse_ramanujan(3, 0).values == std::vector<std::int64_t>{2, -1, -1});
  CHECK(nt::sparse_ramanujan(3, 1).values == std::vector<std::int64_t>{0, 1, -1});
  CHECK(nt::sparse_ramanujan(2, 0).values == std::vector<std::int64_t>{1, -1});
  CHECK_THROWS_AS(nt::sparse_ramanujan(4, 0), std::domain_error);
  CHECK_THROWS_AS(nt::sparse_ramanujan(3, 2), std::domain_error);
  CHECK_THROWS_AS(nt::sparse_ramanujan(3, -1), std::domain_error);
}

TEST_CASE("sparse_ramanujan at k=0 equals the plain sum for primes <= 100") {
  for (std::int64_t q = 2; q <= 100; ++q) {
    if (!nt::is_prime(q)) continue;
    CHECK(nt::sparse_ramanujan(q, 0).values == nt::ramanujan_sum(q).values);
  }
}

TEST_CASE("sparse family is orthogonal over one period for small primes") {
  for (std::int64_t q : {2, 3, 5, 7, 11, 13}) {
    for (std::int64_t k1 = 0; k1 < q - 1; ++k1) {
      for (std::int64_t k2 = 0; k2 < q - 1; ++k2) {
        const auto a = nt::sparse_ramanujan(q, k1);
        const auto b = nt::sparse_ramanujan(q, k2);
        std::int64_t dot = 0;
        for (std::int64_t n = 0; n < q; ++n) dot += a.at(n) * b.at(n);
        if (k1 != k2) CHECK(dot == 0);
        else CHECK(dot > 0);
      }
    }
  }
}
