#include "orpt/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace orpt::nn {

int gate_count(CellKind kind) { return kind == CellKind::Lstm ? 4 : 1; }

std::size_t parameter_count(CellKind kind, Direction dir, int input_dim, int hidden_dim,
                            int classes) {
  const std::size_t g = static_cast<std::size_t>(gate_count(kind));
  const std::size_t f = static_cast<std::size_t>(input_dim);
  const std::size_t m = static_cast<std::size_t>(hidden_dim);
  const std::size_t c = static_cast<std::size_t>(classes);
  const std::size_t recurrent = kind == CellKind::IndRnn ? m : g * m * m;
  const std::size_t one_dir = g * m * f + recurrent + g * m;
  const std::size_t dirs = dir == Direction::Bidirectional ? 2 : 1;
  const std::size_t head_in = dirs * m;
  return dirs * one_dir + c * head_in + c;
}

namespace {

template <class T>
Mat<T> orthogonal_block(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat<T> a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = static_cast<T>(gauss(rng));
  Eigen::HouseholderQR<Mat<T>> qr(a);
  Mat<T> q = qr.householderQ() * Mat<T>::Identity(m, m);
  Mat<T> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < m; ++j)
    if (r(j, j) < T(0)) q.col(j) = -q.col(j);
  return q;
}

template <class T>
CellParams<T> make_cell(CellKind kind, int f, int m, std::mt19937_64& rng) {
  const int g = gate_count(kind);
  CellParams<T> cp;
  const double limit = std::sqrt(6.0 / (f + m));
  std::uniform_real_distribution<double> uni(-limit, limit);
  cp.wx.resize(g * m, f);
  for (int i = 0; i < cp.wx.rows(); ++i)
    for (int j = 0; j < cp.wx.cols(); ++j) cp.wx(i, j) = static_cast<T>(uni(rng));
  if (kind == CellKind::IndRnn) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    cp.wh.resize(m, 1);
    for (int i = 0; i < m; ++i) cp.wh(i, 0) = static_cast<T>(u01(rng));
  } else {
    cp.wh.resize(g * m, m);
    for (int blk = 0; blk < g; ++blk)
      cp.wh.middleRows(blk * m, m) = orthogonal_block<T>(m, rng);
  }
  cp.b = Mat<T>::Zero(g * m, 1);
  if (kind == CellKind::Lstm) cp.b.col(0).segment(m, m).setOnes();  // forget bias
  return cp;
}

}  // namespace

template <class T>
RecurrentParams<T> make_params(CellKind kind, Direction dir, int input_dim, int hidden_dim,
                               int classes, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || classes < 1)
    throw std::domain_error("make_params: dimensions must be positive");
  std::mt19937_64 rng(seed);
  RecurrentParams<T> p;
  p.kind = kind;
  p.direction = dir;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.classes = classes;
  p.fwd = make_cell<T>(kind, input_dim, hidden_dim, rng);
  if (p.bidirectional()) p.bwd = make_cell<T>(kind, input_dim, hidden_dim, rng);
  const int head_in = p.bidirectional() ? 2 * hidden_dim : hidden_dim;
  const double limit = std::sqrt(6.0 / (head_in + classes));
  std::uniform_real_distribution<double> uni(-limit, limit);
  p.head_w.resize(classes, head_in);
  for (int i = 0; i < classes; ++i)
    for (int j = 0; j < head_in; ++j) p.head_w(i, j) = static_cast<T>(uni(rng));
  p.head_b = Mat<T>::Zero(classes, 1);
  return p;
}

namespace {
template <class T>
Mat<T> sigmoid(const Mat<T>& x) {
  return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}
}  // namespace

template <class T>
HiddenState<T> rnn_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x) {
  if (x.size() != p.wx.cols() || prev.h.size() != p.wh.cols())
    throw std::domain_error("rnn_step: dimension mismatch");
  HiddenState<T> s;
  s.h = (p.wh * prev.h + p.wx * x + p.b.col(0)).array().tanh();
  return s;
}

template <class T>
HiddenState<T> indrnn_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x) {
  if (x.size() != p.wx.cols() || prev.h.size() != p.wh.rows())
    throw std::domain_error("indrnn_step: dimension mismatch");
  HiddenState<T> s;
  s.h = (p.wh.col(0).cwiseProduct(prev.h) + p.wx * x + p.b.col(0)).cwiseMax(T(0));
  return s;
}

template <class T>
HiddenState<T> lstm_step(const CellParams<T>& p, const HiddenState<T>& prev, const Vec<T>& x) {
  const int m = static_cast<int>(p.wh.cols());
  if (x.size() != p.wx.cols() || prev.h.size() != m || prev.c.size() != m)
    throw std::domain_error("lstm_step: dimension mismatch");
  const Vec<T> pre = p.wh * prev.h + p.wx * x + p.b.col(0);
  const auto seg = [&](int blk) { return pre.segment(blk * m, m).array(); };
  const auto i = T(1) / (T(1) + (-seg(0)).exp());
  const auto f = T(1) / (T(1) + (-seg(1)).exp());
  const auto g = seg(2).tanh();
  const auto o = T(1) / (T(1) + (-seg(3)).exp());
  HiddenState<T> s;
  s.c = (f * prev.c.array() + i * g).matrix();
  s.h = (o * s.c.array().tanh()).matrix();
  return s;
}

template <class T>
HiddenState<T> cell_step(CellKind kind, const CellParams<T>& p, const HiddenState<T>& prev,
                         const Vec<T>& x) {
  switch (kind) {
    case CellKind::Rnn:
      return rnn_step(p, prev, x);
    case CellKind::IndRnn:
      return indrnn_step(p, prev, x);
    case CellKind::Lstm:
      return lstm_step(p, prev, x);
  }
  throw std::domain_error("cell_step: unknown cell kind");
}

namespace {

template <class T>
HiddenState<T> zero_state(CellKind kind, int m) {
  HiddenState<T> s;
  s.h = Vec<T>::Zero(m);
  if (kind == CellKind::Lstm) s.c = Vec<T>::Zero(m);
  return s;
}

template <class T>
Vec<T> scan_sample(CellKind kind, const CellParams<T>& cp, const SequenceSample& sample,
                   bool reversed) {
  const int m = static_cast<int>(cp.b.rows()) / gate_count(kind);
  HiddenState<T> s = zero_state<T>(kind, m);
  Vec<T> x(sample.features);
  for (int step = 0; step < sample.timesteps; ++step) {
    const int t = reversed ? sample.timesteps - 1 - step : step;
    for (int f = 0; f < sample.features; ++f) x(f) = static_cast<T>(sample.at(t, f));
    s = cell_step(kind, cp, s, x);
  }
  return s.h;
}

}  // namespace

template <class T>
Vec<T> run_sequence(const RecurrentParams<T>& p, const SequenceSample& sample) {
  if (sample.features != p.input_dim)
    throw std::domain_error("run_sequence: feature dimension mismatch");
  Vec<T> h(p.bidirectional() ? 2 * p.hidden_dim : p.hidden_dim);
  h.head(p.hidden_dim) = scan_sample(p.kind, p.fwd, sample, false);
  if (p.bidirectional()) h.tail(p.hidden_dim) = scan_sample(p.kind, p.bwd, sample, true);
  return p.head_w * h + p.head_b.col(0);
}

template <class T>
Batch<T> make_batch(const FeatureSet& fs, std::span<const std::size_t> indices) {
  Batch<T> b;
  b.timesteps = static_cast<int>(fs.timesteps);
  b.features = static_cast<int>(fs.features);
  const int rows = static_cast<int>(indices.size());
  b.xs.assign(static_cast<std::size_t>(b.timesteps), Mat<T>(rows, b.features));
  b.labels.resize(indices.size());
  for (int r = 0; r < rows; ++r) {
    const float* rec = fs.record(indices[static_cast<std::size_t>(r)]);
    b.labels[static_cast<std::size_t>(r)] = fs.labels[indices[static_cast<std::size_t>(r)]];
    for (int t = 0; t < b.timesteps; ++t)
      for (int f = 0; f < b.features; ++f)
        b.xs[static_cast<std::size_t>(t)](r, f) =
            static_cast<T>(rec[static_cast<std::size_t>(t) * b.features + f]);
  }
  return b;
}

template <class T>
Batch<T> make_batch(std::span<const SequenceSample> samples) {
  if (samples.empty()) throw std::domain_error("make_batch: empty batch");
  Batch<T> b;
  b.timesteps = samples[0].timesteps;
  b.features = samples[0].features;
  const int rows = static_cast<int>(samples.size());
  b.xs.assign(static_cast<std::size_t>(b.timesteps), Mat<T>(rows, b.features));
  b.labels.resize(samples.size());
  for (int r = 0; r < rows; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    if (s.timesteps != b.timesteps || s.features != b.features)
      throw std::domain_error("make_batch: inconsistent sample shapes");
    b.labels[static_cast<std::size_t>(r)] = s.label;
    for (int t = 0; t < b.timesteps; ++t)
      for (int f = 0; f < b.features; ++f)
        b.xs[static_cast<std::size_t>(t)](r, f) = static_cast<T>(s.at(t, f));
  }
  return b;
}

namespace {

template <class T>
struct DirCache {
  std::vector<Mat<T>> act;  // LSTM: B x 4M activated gates per step
  std::vector<Mat<T>> h;    // B x M per step
  std::vector<Mat<T>> c;    // LSTM cell state per step
};

/// Scans xs (reversed or not) through one direction; returns the final
/// hidden state. Fills the cache when given.
template <class T>
Mat<T> forward_dir(CellKind kind, const CellParams<T>& cp, const std::vector<Mat<T>>& xs,
                   bool reversed, DirCache<T>* cache) {
  const int tsteps = static_cast<int>(xs.size());
  const int rows = static_cast<int>(xs[0].rows());
  const int m = static_cast<int>(cp.b.rows()) / gate_count(kind);

  Mat<T> h = Mat<T>::Zero(rows, m);
  Mat<T> c;
  if (kind == CellKind::Lstm) c = Mat<T>::Zero(rows, m);
  if (cache) {
    cache->h.resize(static_cast<std::size_t>(tsteps));
    if (kind == CellKind::Lstm) {
      cache->act.resize(static_cast<std::size_t>(tsteps));
      cache->c.resize(static_cast<std::size_t>(tsteps));
    }
  }

  for (int step = 0; step < tsteps; ++step) {
    const Mat<T>& x = xs[static_cast<std::size_t>(reversed ? tsteps - 1 - step : step)];
    Mat<T> pre = x * cp.wx.transpose();
    if (kind == CellKind::IndRnn)
      pre.array() += h.array().rowwise() * cp.wh.col(0).transpose().array();
    else
      pre.noalias() += h * cp.wh.transpose();
    pre.rowwise() += cp.b.col(0).transpose();

    switch (kind) {
      case CellKind::Rnn:
        h = pre.array().tanh().matrix();
        break;
      case CellKind::IndRnn:
        h = pre.cwiseMax(T(0));
        break;
      case CellKind::Lstm: {
        Mat<T> act(rows, 4 * m);
        act.middleCols(0, m) = sigmoid<T>(pre.middleCols(0, m));
        act.middleCols(m, m) = sigmoid<T>(pre.middleCols(m, m));
        act.middleCols(2 * m, m) = pre.middleCols(2 * m, m).array().tanh();
        act.middleCols(3 * m, m) = sigmoid<T>(pre.middleCols(3 * m, m));
        c = (act.middleCols(m, m).array() * c.array() +
             act.middleCols(0, m).array() * act.middleCols(2 * m, m).array())
                .matrix();
        h = (act.middleCols(3 * m, m).array() * c.array().tanh()).matrix();
        if (cache) {
          cache->act[static_cast<std::size_t>(step)] = act;
          cache->c[static_cast<std::size_t>(step)] = c;
        }
        break;
      }
    }
    if (cache) cache->h[static_cast<std::size_t>(step)] = h;
  }
  return h;
}

/// BPTT through one direction; dh_last enters at the final local step.
template <class T>
void backward_dir(CellKind kind, const CellParams<T>& cp, CellParams<T>& gcp,
                  const std::vector<Mat<T>>& xs, bool reversed, const DirCache<T>& cache,
                  Mat<T> dh) {
  const int tsteps = static_cast<int>(xs.size());
  const int rows = static_cast<int>(xs[0].rows());
  const int m = static_cast<int>(cp.b.rows()) / gate_count(kind);
  const Mat<T> zero_h = Mat<T>::Zero(rows, m);
  Mat<T> dc;
  if (kind == CellKind::Lstm) dc = Mat<T>::Zero(rows, m);

  for (int step = tsteps - 1; step >= 0; --step) {
    const std::size_t us = static_cast<std::size_t>(step);
    const Mat<T>& x = xs[static_cast<std::size_t>(reversed ? tsteps - 1 - step : step)];
    const Mat<T>& h_prev = step > 0 ? cache.h[us - 1] : zero_h;

    Mat<T> dpre;
    switch (kind) {
      case CellKind::Rnn: {
        const Mat<T>& h = cache.h[us];
        dpre = (dh.array() * (T(1) - h.array().square())).matrix();
        break;
      }
      case CellKind::IndRnn: {
        const Mat<T>& h = cache.h[us];
        dpre = (dh.array() * (h.array() > T(0)).template cast<T>()).matrix();
        break;
      }
      case CellKind::Lstm: {
        const Mat<T>& act = cache.act[us];
        const auto i = act.middleCols(0, m).array();
        const auto f = act.middleCols(m, m).array();
        const auto g = act.middleCols(2 * m, m).array();
        const auto o = act.middleCols(3 * m, m).array();
        const Mat<T>& ct = cache.c[us];
        const Mat<T>& c_prev = step > 0 ? cache.c[us - 1] : zero_h;
        const auto tc = ct.array().tanh();
        dc.array() += dh.array() * o * (T(1) - tc.square());
        dpre.resize(rows, 4 * m);
        dpre.middleCols(0, m) = (dc.array() * g * i * (T(1) - i)).matrix();
        dpre.middleCols(m, m) = (dc.array() * c_prev.array() * f * (T(1) - f)).matrix();
        dpre.middleCols(2 * m, m) = (dc.array() * i * (T(1) - g.square())).matrix();
        dpre.middleCols(3 * m, m) = (dh.array() * tc * o * (T(1) - o)).matrix();
        dc = (dc.array() * f).matrix();
        break;
      }
    }

    gcp.wx.noalias() += dpre.transpose() * x;
    gcp.b.col(0) += dpre.colwise().sum().transpose();
    if (kind == CellKind::IndRnn) {
      gcp.wh.col(0) += (dpre.array() * h_prev.array()).colwise().sum().transpose().matrix();
      dh = (dpre.array().rowwise() * cp.wh.col(0).transpose().array()).matrix();
    } else {
      gcp.wh.noalias() += dpre.transpose() * h_prev;
      dh.noalias() = dpre * cp.wh;
    }
  }
}

template <class T>
Mat<T> concat_final(const RecurrentParams<T>& p, const Batch<T>& batch, DirCache<T>* fcache,
                    DirCache<T>* bcache) {
  if (batch.features != p.input_dim)
    throw std::domain_error("batch feature dimension mismatch");
  const Mat<T> hf = forward_dir(p.kind, p.fwd, batch.xs, false, fcache);
  if (!p.bidirectional()) return hf;
  const Mat<T> hb = forward_dir(p.kind, p.bwd, batch.xs, true, bcache);
  Mat<T> h(hf.rows(), hf.cols() + hb.cols());
  h << hf, hb;
  return h;
}

}  // namespace

template <class T>
Mat<T> batch_logits(const RecurrentParams<T>& p, const Batch<T>& batch) {
  const Mat<T> h = concat_final<T>(p, batch, nullptr, nullptr);
  Mat<T> logits = h * p.head_w.transpose();
  logits.rowwise() += p.head_b.col(0).transpose();
  return logits;
}

template <class T>
LossGrad<T> loss_and_grad(const RecurrentParams<T>& p, const Batch<T>& batch) {
  if (batch.labels.empty()) throw std::domain_error("loss_and_grad: empty batch");
  const int rows = static_cast<int>(batch.labels.size());
  const int m = p.hidden_dim;

  DirCache<T> fcache, bcache;
  const Mat<T> h = concat_final<T>(p, batch, &fcache, p.bidirectional() ? &bcache : nullptr);
  Mat<T> logits = h * p.head_w.transpose();
  logits.rowwise() += p.head_b.col(0).transpose();

  LossGrad<T> out;
  out.grad = p.zeros_like();

  // Stable softmax cross-entropy, mean over the batch.
  Mat<T> prob(rows, p.classes);
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int y = batch.labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= p.classes) throw std::domain_error("loss_and_grad: label out of range");
    const T zmax = logits.row(r).maxCoeff();
    const auto shifted = (logits.row(r).array() - zmax).exp();
    const T denom = shifted.sum();
    prob.row(r) = (shifted / denom).matrix();
    const double li =
        std::log(static_cast<double>(denom)) - static_cast<double>(logits(r, y) - zmax);
    if (!std::isfinite(li))
      throw std::runtime_error("loss_and_grad: non-finite loss at batch index " +
                               std::to_string(r));
    loss += li;
    int arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (arg == y) ++out.correct;
  }
  out.loss = loss / rows;

  Mat<T> dlogits = prob;
  for (int r = 0; r < rows; ++r) dlogits(r, batch.labels[static_cast<std::size_t>(r)]) -= T(1);
  dlogits /= static_cast<T>(rows);

  out.grad.head_w.noalias() = dlogits.transpose() * h;
  out.grad.head_b.col(0) = dlogits.colwise().sum().transpose();

  const Mat<T> dh = dlogits * p.head_w;
  backward_dir(p.kind, p.fwd, out.grad.fwd, batch.xs, false, fcache, Mat<T>(dh.leftCols(m)));
  if (p.bidirectional())
    backward_dir(p.kind, p.bwd, out.grad.bwd, batch.xs, true, bcache, Mat<T>(dh.rightCols(m)));
  return out;
}

template <class T>
LossGrad<T> loss_and_grad(const RecurrentParams<T>& p, std::span<const SequenceSample> samples) {
  return loss_and_grad(p, make_batch<T>(samples));
}

template <class T>
void adam_update(RecurrentParams<T>& p, const RecurrentParams<T>& grad, AdamState<T>& state,
                 const AdamHyper& hyper) {
  auto pt = p.tensors();
  const auto gt = grad.tensors();
  auto mt = state.m.tensors();
  auto vt = state.v.tensors();

  double sq = 0.0;
  for (const auto* g : gt) sq += static_cast<double>(g->template cast<double>().squaredNorm());
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw std::runtime_error("adam_update: non-finite gradient");
  const double scale = hyper.clip > 0.0 && norm > hyper.clip ? hyper.clip / norm : 1.0;

  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, state.step);
  const double bc2 = 1.0 - std::pow(hyper.beta2, state.step);
  const T lr_t = static_cast<T>(hyper.lr * std::sqrt(bc2) / bc1);
  const T b1 = static_cast<T>(hyper.beta1), b2 = static_cast<T>(hyper.beta2);
  const T eps = static_cast<T>(hyper.eps), sc = static_cast<T>(scale);

  for (std::size_t k = 0; k < pt.size(); ++k) {
    const auto g = (gt[k]->array() * sc).eval();
    mt[k]->array() = b1 * mt[k]->array() + (T(1) - b1) * g;
    vt[k]->array() = b2 * vt[k]->array() + (T(1) - b2) * g.square();
    pt[k]->array() -= lr_t * mt[k]->array() / (vt[k]->array().sqrt() + eps);
  }
}

double gradient_check(const RecurrentParams<double>& p, std::span<const SequenceSample> samples,
                      double eps) {
  const auto batch = make_batch<double>(samples);
  const auto analytic = loss_and_grad(p, batch);
  RecurrentParams<double> probe = p;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.grad.tensors();

  double worst = 0.0;
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    Mat<double>& t = *probe_tensors[k];
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        const double saved = t(i, j);
        t(i, j) = saved + eps;
        const double lp = loss_and_grad(probe, batch).loss;
        t(i, j) = saved - eps;
        const double lm = loss_and_grad(probe, batch).loss;
        t(i, j) = saved;
        const double fd = (lp - lm) / (2.0 * eps);
        const double g = (*grad_tensors[k])(i, j);
        const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-4});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {
constexpr char kCkptMagic[8] = {'O', 'R', 'P', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

std::uint64_t fnv1a(const unsigned char* data, std::size_t len) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void save_checkpoint(const std::string& path, const RecurrentParams<float>& p) {
  std::string payload;
  for (const auto* t : p.tensors()) {
    put_u32le(payload, static_cast<std::uint32_t>(t->rows()));
    put_u32le(payload, static_cast<std::uint32_t>(t->cols()));
    const Mat<float>& m = *t;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        float v = m(i, j);
        char buf[4];
        std::memcpy(buf, &v, 4);
        payload.append(buf, 4);
      }
  }
  const std::uint64_t sum =
      fnv1a(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kCkptMagic, sizeof kCkptMagic);
  std::string header;
  put_u32le(header, kCkptVersion);
  put_u32le(header, static_cast<std::uint32_t>(p.kind));
  put_u32le(header, static_cast<std::uint32_t>(p.direction));
  put_u32le(header, static_cast<std::uint32_t>(p.input_dim));
  put_u32le(header, static_cast<std::uint32_t>(p.hidden_dim));
  put_u32le(header, static_cast<std::uint32_t>(p.classes));
  put_u32le(header, static_cast<std::uint32_t>(sum));
  put_u32le(header, static_cast<std::uint32_t>(sum >> 32));
  os << header << payload;
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

RecurrentParams<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (get_u32le(is) != kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  const auto kind = static_cast<CellKind>(get_u32le(is));
  const auto dir = static_cast<Direction>(get_u32le(is));
  const int f = static_cast<int>(get_u32le(is));
  const int m = static_cast<int>(get_u32le(is));
  const int c = static_cast<int>(get_u32le(is));
  const std::uint64_t want =
      static_cast<std::uint64_t>(get_u32le(is)) |
      (static_cast<std::uint64_t>(get_u32le(is)) << 32);

  std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (fnv1a(reinterpret_cast<const unsigned char*>(payload.data()), payload.size()) != want)
    throw std::runtime_error("checkpoint: checksum mismatch in " + path);

  RecurrentParams<float> p = make_params<float>(kind, dir, f, m, c, 0);
  std::size_t pos = 0;
  auto next_u32 = [&]() {
    if (pos + 4 > payload.size()) throw std::runtime_error("checkpoint: truncated payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[pos++])) << (8 * i);
    return v;
  };
  for (auto* t : p.tensors()) {
    const auto rows = static_cast<Eigen::Index>(next_u32());
    const auto cols = static_cast<Eigen::Index>(next_u32());
    if (rows != t->rows() || cols != t->cols())
      throw std::runtime_error("checkpoint: tensor shape mismatch in " + path);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (pos + 4 > payload.size()) throw std::runtime_error("checkpoint: truncated payload");
        float v;
        std::memcpy(&v, payload.data() + pos, 4);
        pos += 4;
        (*t)(i, j) = v;
      }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Convolution ops

std::vector<double> dilated_causal_conv(const ConvSpec& spec, std::span<const double> x) {
  if (x.empty()) throw std::domain_error("dilated_causal_conv: empty input");
  if (spec.taps.empty()) throw std::domain_error("dilated_causal_conv: empty filter");
  if (spec.dilation < 1) throw std::domain_error("dilated_causal_conv: dilation must be >= 1");
  std::vector<double> out(x.size(), 0.0);
  const auto n = static_cast<std::int64_t>(x.size());
  const auto len = static_cast<std::int64_t>(spec.taps.size());
  for (std::int64_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < len; ++i) {
      const std::int64_t src = k - static_cast<std::int64_t>(spec.dilation) * i;
      if (src < 0) break;  // zero padding
      acc += spec.taps[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(src)];
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

std::vector<double> residual_block(
    std::span<const double> x,
    const std::function<std::vector<double>(std::span<const double>)>& f, double projection) {
  const std::vector<double> fx = f(x);
  if (fx.size() != x.size())
    throw std::domain_error("residual_block: length mismatch after projection");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = std::max(0.0, projection * x[i] + fx[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define ORPT_NN_INSTANTIATE(T)                                                              \
  template RecurrentParams<T> make_params<T>(CellKind, Direction, int, int, int,            \
                                             std::uint64_t);                                \
  template HiddenState<T> rnn_step<T>(const CellParams<T>&, const HiddenState<T>&,          \
                                      const Vec<T>&);                                       \
  template HiddenState<T> indrnn_step<T>(const CellParams<T>&, const HiddenState<T>&,       \
                                         const Vec<T>&);                                    \
  template HiddenState<T> lstm_step<T>(const CellParams<T>&, const HiddenState<T>&,         \
                                       const Vec<T>&);                                      \
  template HiddenState<T> cell_step<T>(CellKind, const CellParams<T>&,                      \
                                       const HiddenState<T>&, const Vec<T>&);               \
  template Vec<T> run_sequence<T>(const RecurrentParams<T>&, const SequenceSample&);        \
  template Batch<T> make_batch<T>(const FeatureSet&, std::span<const std::size_t>);         \
  template Batch<T> make_batch<T>(std::span<const SequenceSample>);                         \
  template Mat<T> batch_logits<T>(const RecurrentParams<T>&, const Batch<T>&);              \
  template LossGrad<T> loss_and_grad<T>(const RecurrentParams<T>&, const Batch<T>&);        \
  template LossGrad<T> loss_and_grad<T>(const RecurrentParams<T>&,                          \
                                        std::span<const SequenceSample>);                   \
  template void adam_update<T>(RecurrentParams<T>&, const RecurrentParams<T>&,              \
                               AdamState<T>&, const AdamHyper&);

ORPT_NN_INSTANTIATE(float)
ORPT_NN_INSTANTIATE(double)

#undef ORPT_NN_INSTANTIATE

}  // namespace orpt::nn
