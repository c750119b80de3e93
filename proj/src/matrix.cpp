#include "orpt/matrix.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "orpt/numtheory.hpp"

namespace orpt {

std::vector<std::int64_t> basis_column(int n, int d, std::span<const int> shifts,
                                       std::span<const int> indices) {
  if (n < 1) throw std::domain_error("basis_column: n must be positive");
  if (d < 1 || n % d != 0) throw std::domain_error("basis_column: d must divide n");
  const auto fac = nt::factorize(d);
  if (shifts.size() != fac.size() || indices.size() != fac.size())
    throw std::domain_error("basis_column: one shift and one index per prime factor");

  std::vector<std::int64_t> v(static_cast<std::size_t>(n), 1);
  for (std::size_t t = 0; t < fac.size(); ++t) {
    const std::int64_t p = fac[t].prime;
    std::int64_t s = 1;  // p^(r-1)
    for (int e = 1; e < fac[t].exponent; ++e) s *= p;
    if (shifts[t] < 0 || shifts[t] >= s)
      throw std::domain_error("basis_column: shift out of range");
    if (indices[t] < 0 || indices[t] >= nt::totient(p))
      throw std::domain_error("basis_column: index out of range");
    const auto seq = nt::sparse_ramanujan(p, indices[t]);
    const std::int64_t j = shifts[t];
    for (int i = 0; i < n; ++i) {
      if ((i - j) % s != 0) {
        v[static_cast<std::size_t>(i)] = 0;
      } else {
        v[static_cast<std::size_t>(i)] *= seq.at((i - j) / s);
      }
    }
  }
  return v;
}

OrptMatrix build_matrix(int n) {
  if (n < 1 || n > 4096) throw std::domain_error("build_matrix: n must be in 1..4096");

  OrptMatrix m;
  m.size = n;
  m.entries.assign(static_cast<std::size_t>(n) * n, 0);
  m.column_divisor.reserve(static_cast<std::size_t>(n));

  int col = 0;
  for (std::int64_t d : nt::divisors(n)) {
    const auto fac = nt::factorize(d);
    const std::size_t mfac = fac.size();
    // Mixed-radix enumeration over (j_1..j_m, k_1..k_m); shifts are the
    // more significant digits so they vary slower.
    std::vector<int> radix(2 * mfac);
    for (std::size_t t = 0; t < mfac; ++t) {
      std::int64_t s = 1;
      for (int e = 1; e < fac[t].exponent; ++e) s *= fac[t].prime;
      radix[t] = static_cast<int>(s);
      radix[mfac + t] = static_cast<int>(nt::totient(fac[t].prime));
    }
    std::vector<int> digits(2 * mfac, 0);
    bool more = true;
    while (more) {
      if (col >= n) throw std::runtime_error("build_matrix: column count overflow");
      const std::span<const int> shifts(digits.data(), mfac);
      const std::span<const int> indices(digits.data() + mfac, mfac);
      const auto v = basis_column(n, static_cast<int>(d), shifts, indices);
      for (int r = 0; r < n; ++r)
        m.entries[static_cast<std::size_t>(r) * n + col] = v[static_cast<std::size_t>(r)];
      m.column_divisor.push_back(static_cast<int>(d));
      ++col;

      more = false;
      for (std::size_t t = digits.size(); t-- > 0;) {
        if (++digits[t] < radix[t]) {
          more = true;
          break;
        }
        digits[t] = 0;
      }
      if (digits.empty()) more = false;  // d = 1 contributes one column
    }
  }
  if (col != n)
    throw std::runtime_error("build_matrix: sum of phi over divisors != n (" +
                             std::to_string(col) + " columns)");

  // Exact Gram check: R^T R must be diagonal.
  m.column_norms.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::int64_t dot = 0;
      for (int r = 0; r < n; ++r) dot += m.at(r, i) * m.at(r, j);
      if (i == j) {
        if (dot <= 0) throw std::runtime_error("build_matrix: zero basis column");
        m.column_norms[static_cast<std::size_t>(i)] = dot;
      } else if (dot != 0) {
        throw std::runtime_error("build_matrix: columns " + std::to_string(i) + " and " +
                                 std::to_string(j) + " not orthogonal");
      }
    }
  }
  return m;
}

CoefficientVector forward_1d(const OrptMatrix& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.size)
    throw std::domain_error("forward_1d: length mismatch");
  CoefficientVector beta;
  beta.values.resize(x.size());
  beta.divisor_tag = m.column_divisor;
  for (int c = 0; c < m.size; ++c) {
    double acc = 0.0;
    for (int r = 0; r < m.size; ++r) acc += static_cast<double>(m.at(r, c)) * x[r];
    beta.values[static_cast<std::size_t>(c)] = acc;
  }
  return beta;
}

std::vector<double> inverse_1d(const OrptMatrix& m, std::span<const double> beta) {
  if (static_cast<int>(beta.size()) != m.size)
    throw std::domain_error("inverse_1d: length mismatch");
  std::vector<double> x(beta.size(), 0.0);
  for (int c = 0; c < m.size; ++c) {
    const double scaled = beta[c] / static_cast<double>(m.column_norms[c]);
    for (int r = 0; r < m.size; ++r)
      x[static_cast<std::size_t>(r)] += static_cast<double>(m.at(r, c)) * scaled;
  }
  return x;
}

std::vector<double> inverse_1d(const OrptMatrix& m, const CoefficientVector& beta) {
  return inverse_1d(m, std::span<const double>(beta.values));
}

void write_matrix_text(std::ostream& os, const OrptMatrix& m) {
  os << "ORPT " << m.size << "\n";
  for (int r = 0; r < m.size; ++r) {
    for (int c = 0; c < m.size; ++c) {
      if (c) os << ' ';
      os << m.at(r, c);
    }
    os << "\n";
  }
}

}  // namespace orpt
