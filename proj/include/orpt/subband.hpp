#pragma once

#include <span>
#include <vector>

#include "orpt/matrix.hpp"

namespace orpt {

/// Square image plane of normalized intensities.
struct ImagePlane {
  int size = 0;
  std::vector<double> px;  // row-major, size*size

  double& at(int r, int c) { return px[static_cast<std::size_t>(r) * size + c]; }
  double at(int r, int c) const { return px[static_cast<std::size_t>(r) * size + c]; }
};

/// d x d grid of (N/d) x (N/d) coefficient planes. Channel (0,0) is the
/// average component, the remaining d^2 - 1 are detail components.
struct SubbandGrid {
  int divisor = 0;
  int sub = 0;  // side of one channel
  std::vector<double> data;  // channel-major: channel (ci,cj) then raster

  double& at(int ci, int cj, int r, int c) {
    return data[((static_cast<std::size_t>(ci) * divisor + cj) * sub + r) * sub + c];
  }
  double at(int ci, int cj, int r, int c) const {
    return data[((static_cast<std::size_t>(ci) * divisor + cj) * sub + r) * sub + c];
  }
};

/// T x F feature sequence plus class label.
struct SequenceSample {
  int timesteps = 0;
  int features = 0;
  std::vector<double> values;  // timestep-major
  int label = 0;

  double at(int t, int f) const { return values[static_cast<std::size_t>(t) * features + f]; }
};

/// Dense blockwise analysis operator B = P (I kron R_d^T) for an N x N
/// image, with P the polyphase grouping that collects coefficient c of
/// every block into contiguous segment c. inv holds B^-1 = (I kron R_d D^-1) P^T.
struct AnalysisOperator {
  int size = 0;     // N
  int divisor = 0;  // d
  std::vector<double> fwd;  // row-major N x N
  std::vector<double> inv;
};

AnalysisOperator analysis_operator(const OrptMatrix& rd, int n);

SubbandGrid transform_2d(const AnalysisOperator& b, const ImagePlane& x);
ImagePlane inverse_2d(const AnalysisOperator& b, const SubbandGrid& y);

/// Batch transform, one grid per input plane. Parallelized across planes
/// with OpenMP; output order matches input order.
std::vector<SubbandGrid> transform_2d_batch(const AnalysisOperator& b,
                                            std::span<const ImagePlane> planes);
/// Serial reference for the batch kernel.
std::vector<SubbandGrid> transform_2d_batch_serial(const AnalysisOperator& b,
                                                   std::span<const ImagePlane> planes);

/// Haar decomposition with unnormalized +-1 kernels.
/// levels=1: {LL, LH, HL, HH}, all (N/2)^2.
/// levels=2: {LL2, LH2, HL2, HH2, LH, HL, HH}; the first four are (N/4)^2.
std::vector<ImagePlane> haar_subbands(const ImagePlane& x, int levels);

/// Vectorizes 1 (grayscale) or 3 (color) grids into a T x F sequence with
/// T = (N/d)^2 and F = d^2 * planes. Timestep t carries the t-th raster
/// coefficient of every channel; feature order is plane-major, then grid
/// row-major.
SequenceSample pack_sequence(std::span<const SubbandGrid> grids, int label);

/// Exact inverse of pack_sequence.
std::vector<SubbandGrid> unpack_sequence(const SequenceSample& s, int divisor, int n,
                                         int planes);

}  // namespace orpt
