#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "orpt/featureset.hpp"
#include "orpt/subband.hpp"

namespace orpt::nn {

enum class CellKind { Rnn, IndRnn, Lstm };
enum class Direction { Forward, Bidirectional };

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

int gate_count(CellKind kind);

/// Weights of one recurrent direction. Gate blocks for the LSTM are
/// stacked row-wise in the order i, f, g, o.
template <class T>
struct CellParams {
  Mat<T> wx;  // (G*M) x F
  Mat<T> wh;  // (G*M) x M for full recurrence, M x 1 for IndRNN
  Mat<T> b;   // (G*M) x 1
};

template <class T>
struct RecurrentParams {
  CellKind kind = CellKind::Lstm;
  Direction direction = Direction::Forward;
  int input_dim = 0;
  int hidden_dim = 0;
  int classes = 0;
  CellParams<T> fwd;
  CellParams<T> bwd;  // used only when bidirectional
  Mat<T> head_w;      // C x M, or C x 2M when bidirectional
  Mat<T> head_b;      // C x 1

  bool bidirectional() const { return direction == Direction::Bidirectional; }

  /// Live tensors in a fixed order; gradient/optimizer state mirrors it.
  std::vector<Mat<T>*> tensors() {
    std::vector<Mat<T>*> v{&fwd.wx, &fwd.wh, &fwd.b};
    if (bidirectional()) {
      v.push_back(&bwd.wx);
      v.push_back(&bwd.wh);
      v.push_back(&bwd.b);
    }
    v.push_back(&head_w);
    v.push_back(&head_b);
    return v;
  }
  std::vector<const Mat<T>*> tensors() const {
    std::vector<const Mat<T>*> v{&fwd.wx, &fwd.wh, &fwd.b};
    if (bidirectional()) {
      v.push_back(&bwd.wx);
      v.push_back(&bwd.wh);
      v.push_back(&bwd.b);
    }
    v.push_back(&head_w);
    v.push_back(&head_b);
    return v;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* m : tensors()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  RecurrentParams zeros_like() const {
    RecurrentParams z = *this;
    for (auto* m : z.tensors()) m->setZero();
    return z;
  }
};

/// Closed-form trainable parameter count for a single-layer net.
std::size_t parameter_count(CellKind kind, Direction dir, int input_dim, int hidden_dim,
                            int classes);

template <class T>
RecurrentParams<T> make_params(CellKind kind, Direction dir, int input_dim, int hidden_dim,
                               int classes, std::uint64_t seed);

template <class T>
struct HiddenState {
  Vec<T> h;
  Vec<T> c;  // LSTM only
};

// Single-sample steps; these are the serial reference path.
template <class T>
HiddenState<T> rnn_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x);
template <class T>
HiddenState<T> indrnn_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x);
template <class T>
HiddenState<T> lstm_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x);
template <class T>
HiddenState<T> cell_step(CellKind kind, const CellParams<T>& p, const HiddenState<T>& prev,
                         const Vec<T>& x);

/// Full sequence to class logits via the step functions (serial).
template <class T>
Vec<T> run_sequence(const RecurrentParams<T>& p, const SequenceSample& sample);

/// Minibatch laid out per timestep as B x F matrices.
template <class T>
struct Batch {
  int timesteps = 0;
  int features = 0;
  std::vector<Mat<T>> xs;  // T matrices, each B x F
  std::vector<int> labels;
};

template <class T>
Batch<T> make_batch(const FeatureSet& fs, std::span<const std::size_t> indices);
template <class T>
Batch<T> make_batch(std::span<const SequenceSample> samples);

/// Batched forward pass, logits only (B x C).
template <class T>
Mat<T> batch_logits(const RecurrentParams<T>& p, const Batch<T>& batch);

template <class T>
struct LossGrad {
  double loss = 0.0;
  int correct = 0;
  RecurrentParams<T> grad;
};

/// Mean softmax cross-entropy and exact BPTT gradients for the batch.
template <class T>
LossGrad<T> loss_and_grad(const RecurrentParams<T>& p, const Batch<T>& batch);
template <class T>
LossGrad<T> loss_and_grad(const RecurrentParams<T>& p, std::span<const SequenceSample> samples);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 1.0;  // global gradient norm; <= 0 disables clipping
};

template <class T>
struct AdamState {
  RecurrentParams<T> m, v;
  long step = 0;

  static AdamState init(const RecurrentParams<T>& p) {
    return {p.zeros_like(), p.zeros_like(), 0};
  }
};

template <class T>
void adam_update(RecurrentParams<T>& p, const RecurrentParams<T>& grad, AdamState<T>& state,
                 const AdamHyper& hyper);

/// Largest disagreement between the BPTT gradients and central finite
/// differences of the loss, relative to max(|fd|, |grad|, 1e-4). Only the
/// forward loss feeds the finite differences, so this is independent of
/// the backward path it checks.
double gradient_check(const RecurrentParams<double>& p, std::span<const SequenceSample> samples,
                      double eps = 1e-5);

/// Versioned binary checkpoint: shapes plus little-endian f32 payload with
/// an FNV-1a checksum recorded in the header.
void save_checkpoint(const std::string& path, const RecurrentParams<float>& p);
RecurrentParams<float> load_checkpoint(const std::string& path);

/// Dilated causal convolution filter.
struct ConvSpec {
  std::vector<double> taps;
  int dilation = 1;
};

/// R^k = sum_i f^i x^{k - d*i}, zero padded on the left; output length
/// equals input length.
std::vector<double> dilated_causal_conv(const ConvSpec& spec, std::span<const double> x);

/// o = relu(projection * x + f(x)). The projection plays the role of the
/// 1x1 width-matching convolution; identity shortcut when it is 1.
std::vector<double> residual_block(
    std::span<const double> x,
    const std::function<std::vector<double>(std::span<const double>)>& f,
    double projection = 1.0);

}  // namespace orpt::nn
