#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace orpt {

/// Integer N x N transform matrix whose columns form an orthogonal basis.
/// Columns are grouped by the divisor of N that generated them; column i
/// has exact squared norm column_norms[i].
struct OrptMatrix {
  int size = 0;
  std::vector<std::int64_t> entries;       // row-major; columns are basis vectors
  std::vector<std::int64_t> column_norms;  // <col_i, col_i>, exact
  std::vector<int> column_divisor;         // generating divisor per column

  std::int64_t at(int r, int c) const {
    return entries[static_cast<std::size_t>(r) * size + c];
  }
};

/// Transform coefficients beta indexed like the matrix columns, each index
/// tagged with its generating divisor.
struct CoefficientVector {
  std::vector<double> values;
  std::vector<int> divisor_tag;
};

/// One basis column v(n) = prod_t c^{k_t}_{p_t}(n / p_t^{r_t-1} - j_t),
/// n = 0..N-1, for divisor d = prod_t p_t^{r_t} of N. Each factor is the
/// period-p_t^{r_t} upsample-and-shift of the sparse Ramanujan sequence:
/// it is nonzero only on n congruent to j_t mod p_t^{r_t-1}.
std::vector<std::int64_t> basis_column(int n, int d, std::span<const int> shifts,
                                       std::span<const int> indices);

/// Builds the full matrix for 1 <= n <= 4096. Columns are enumerated in
/// increasing divisor order; within a divisor the (shifts, indices) tuple
/// runs lexicographically with shifts varying slower. Orthogonality and the
/// column count sum_{d|n} phi(d) = n are asserted; failure throws.
OrptMatrix build_matrix(int n);

/// beta = R^T x.
CoefficientVector forward_1d(const OrptMatrix& m, std::span<const double> x);

/// x = R D^-1 beta with D = diag(column_norms).
std::vector<double> inverse_1d(const OrptMatrix& m, const CoefficientVector& beta);
std::vector<double> inverse_1d(const OrptMatrix& m, std::span<const double> beta);

/// Plain-text export: first line "ORPT N", then N rows of N integers.
void write_matrix_text(std::ostream& os, const OrptMatrix& m);

}  // namespace orpt
