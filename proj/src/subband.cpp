#include "orpt/subband.hpp"

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>

namespace orpt {

namespace {
using Md = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMd = Eigen::Map<const Md>;
}  // namespace

AnalysisOperator analysis_operator(const OrptMatrix& rd, int n) {
  const int d = rd.size;
  if (d < 1 || n < 1 || n % d != 0)
    throw std::domain_error("analysis_operator: divisor must divide image side");
  const int nb = n / d;  // blocks per row, also channel side

  AnalysisOperator op;
  op.size = n;
  op.divisor = d;
  op.fwd.assign(static_cast<std::size_t>(n) * n, 0.0);
  op.inv.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int c = 0; c < d; ++c) {
    for (int blk = 0; blk < nb; ++blk) {
      for (int t = 0; t < d; ++t) {
        const double e = static_cast<double>(rd.at(t, c));
        // row c*nb+blk of B is basis column c against block blk
        op.fwd[static_cast<std::size_t>(c * nb + blk) * n + blk * d + t] = e;
        op.inv[static_cast<std::size_t>(blk * d + t) * n + c * nb + blk] =
            e / static_cast<double>(rd.column_norms[static_cast<std::size_t>(c)]);
      }
    }
  }
  return op;
}

SubbandGrid transform_2d(const AnalysisOperator& b, const ImagePlane& x) {
  const int n = b.size;
  if (x.size != n) throw std::domain_error("transform_2d: image side mismatch");
  const int d = b.divisor;
  const int nb = n / d;

  MapMd bm(b.fwd.data(), n, n);
  MapMd xm(x.px.data(), n, n);
  Md y = bm * xm * bm.transpose();

  SubbandGrid g;
  g.divisor = d;
  g.sub = nb;
  g.data.resize(static_cast<std::size_t>(n) * n);
  for (int ci = 0; ci < d; ++ci)
    for (int cj = 0; cj < d; ++cj)
      for (int r = 0; r < nb; ++r)
        for (int c = 0; c < nb; ++c) g.at(ci, cj, r, c) = y(ci * nb + r, cj * nb + c);
  return g;
}

ImagePlane inverse_2d(const AnalysisOperator& b, const SubbandGrid& y) {
  const int n = b.size;
  const int d = b.divisor;
  const int nb = n / d;
  if (y.divisor != d || y.sub != nb) throw std::domain_error("inverse_2d: shape mismatch");

  Md ym(n, n);
  for (int ci = 0; ci < d; ++ci)
    for (int cj = 0; cj < d; ++cj)
      for (int r = 0; r < nb; ++r)
        for (int c = 0; c < nb; ++c) ym(ci * nb + r, cj * nb + c) = y.at(ci, cj, r, c);

  MapMd bi(b.inv.data(), n, n);
  Md xm = bi * ym * bi.transpose();

  ImagePlane x;
  x.size = n;
  x.px.resize(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) x.at(r, c) = xm(r, c);
  return x;
}

std::vector<SubbandGrid> transform_2d_batch(const AnalysisOperator& b,
                                            std::span<const ImagePlane> planes) {
  std::vector<SubbandGrid> out(planes.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(planes.size()); ++i)
    out[static_cast<std::size_t>(i)] = transform_2d(b, planes[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<SubbandGrid> transform_2d_batch_serial(const AnalysisOperator& b,
                                                   std::span<const ImagePlane> planes) {
  std::vector<SubbandGrid> out;
  out.reserve(planes.size());
  for (const auto& p : planes) out.push_back(transform_2d(b, p));
  return out;
}

namespace {
// One Haar level with +-1 kernels; returns {LL, LH, HL, HH}.
std::array<ImagePlane, 4> haar_level(const ImagePlane& x) {
  const int h = x.size / 2;
  std::array<ImagePlane, 4> out;
  for (auto& p : out) {
    p.size = h;
    p.px.resize(static_cast<std::size_t>(h) * h);
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < h; ++c) {
      const double a = x.at(2 * r, 2 * c), bb = x.at(2 * r, 2 * c + 1);
      const double cc = x.at(2 * r + 1, 2 * c), dd = x.at(2 * r + 1, 2 * c + 1);
      out[0].at(r, c) = a + bb + cc + dd;
      out[1].at(r, c) = a - bb + cc - dd;
      out[2].at(r, c) = a + bb - cc - dd;
      out[3].at(r, c) = a - bb - cc + dd;
    }
  }
  return out;
}
}  // namespace

std::vector<ImagePlane> haar_subbands(const ImagePlane& x, int levels) {
  if (levels != 1 && levels != 2) throw std::domain_error("haar_subbands: levels must be 1 or 2");
  const int div = 1 << levels;
  if (x.size % div != 0)
    throw std::domain_error("haar_subbands: side not divisible by 2^levels");
  auto l1 = haar_level(x);
  if (levels == 1) return {l1[0], l1[1], l1[2], l1[3]};
  auto l2 = haar_level(l1[0]);
  return {l2[0], l2[1], l2[2], l2[3], l1[1], l1[2], l1[3]};
}

SequenceSample pack_sequence(std::span<const SubbandGrid> grids, int label) {
  if (grids.empty() || (grids.size() != 1 && grids.size() != 3))
    throw std::domain_error("pack_sequence: expected 1 or 3 grids");
  const int d = grids[0].divisor;
  const int sub = grids[0].sub;
  for (const auto& g : grids)
    if (g.divisor != d || g.sub != sub)
      throw std::domain_error("pack_sequence: inconsistent grids");

  SequenceSample s;
  s.timesteps = sub * sub;
  s.features = d * d * static_cast<int>(grids.size());
  s.label = label;
  s.values.resize(static_cast<std::size_t>(s.timesteps) * s.features);
  for (int t = 0; t < s.timesteps; ++t) {
    const int r = t / sub, c = t % sub;
    int f = 0;
    for (const auto& g : grids)
      for (int ci = 0; ci < d; ++ci)
        for (int cj = 0; cj < d; ++cj)
          s.values[static_cast<std::size_t>(t) * s.features + f++] = g.at(ci, cj, r, c);
  }
  return s;
}

std::vector<SubbandGrid> unpack_sequence(const SequenceSample& s, int divisor, int n,
                                         int planes) {
  if (planes != 1 && planes != 3) throw std::domain_error("unpack_sequence: planes must be 1 or 3");
  if (divisor < 1 || n % divisor != 0)
    throw std::domain_error("unpack_sequence: divisor must divide side");
  const int sub = n / divisor;
  if (s.timesteps != sub * sub || s.features != divisor * divisor * planes)
    throw std::domain_error("unpack_sequence: dimensions inconsistent with sample");

  std::vector<SubbandGrid> grids(static_cast<std::size_t>(planes));
  for (auto& g : grids) {
    g.divisor = divisor;
    g.sub = sub;
    g.data.resize(static_cast<std::size_t>(sub) * sub * divisor * divisor);
  }
  for (int t = 0; t < s.timesteps; ++t) {
    const int r = t / sub, c = t % sub;
    int f = 0;
    for (auto& g : grids)
      for (int ci = 0; ci < divisor; ++ci)
        for (int cj = 0; cj < divisor; ++cj) g.at(ci, cj, r, c) = s.at(t, f++);
  }
  return grids;
}

}  // namespace orpt
