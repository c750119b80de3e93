#include "orpt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace orpt::harness {

namespace {

const char* kCrlf = "\r\n";

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Deterministic Fisher-Yates, independent of library shuffle internals.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: missing '=' at line " + std::to_string(lineno));
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "dataset") cfg.dataset = val;
    else if (key == "divisor") cfg.divisor = std::stoi(val);
    else if (key == "cell") {
      if (val == "rnn") cfg.cell = nn::CellKind::Rnn;
      else if (val == "indrnn") cfg.cell = nn::CellKind::IndRnn;
      else if (val == "lstm") cfg.cell = nn::CellKind::Lstm;
      else throw std::runtime_error("config: unknown cell '" + val + "'");
    } else if (key == "direction") {
      if (val == "forward") cfg.direction = nn::Direction::Forward;
      else if (val == "bidirectional") cfg.direction = nn::Direction::Bidirectional;
      else throw std::runtime_error("config: unknown direction '" + val + "'");
    } else if (key == "hidden") cfg.hidden = std::stoi(val);
    else if (key == "batch") cfg.batch = std::stoi(val);
    else if (key == "epochs") cfg.epochs = std::stoi(val);
    else if (key == "max_iterations") cfg.max_iterations = std::stoi(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "clip") cfg.clip = std::stod(val);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
  return cfg;
}

double evaluate(const nn::RecurrentParams<float>& p, const FeatureSet& fs, int batch) {
  std::size_t correct = 0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
  for (std::size_t start = 0; start < fs.count(); start += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch),
                                                fs.count() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const auto b = nn::make_batch<float>(fs, idx);
    const auto logits = nn::batch_logits(p, b);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      int arg = 0;
      logits.row(r).maxCoeff(&arg);
      if (arg == b.labels[static_cast<std::size_t>(r)]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(fs.count());
}

TrainReport run_experiment(const ExperimentConfig& cfg, const FeatureSet& train,
                           const FeatureSet& test, nn::RecurrentParams<float>* out_params,
                           const nn::RecurrentParams<float>* init_params) {
  if (train.count() == 0) throw std::runtime_error("run_experiment: empty training set");
  if (train.timesteps != test.timesteps || train.features != test.features)
    throw std::runtime_error("run_experiment: train/test feature shape mismatch");

  auto params = init_params
                    ? *init_params
                    : nn::make_params<float>(cfg.cell, cfg.direction,
                                             static_cast<int>(train.features), cfg.hidden,
                                             static_cast<int>(train.classes), cfg.seed);
  if (params.kind != cfg.cell || params.direction != cfg.direction ||
      params.input_dim != static_cast<int>(train.features) || params.hidden_dim != cfg.hidden ||
      params.classes != static_cast<int>(train.classes))
    throw std::invalid_argument("run_experiment: initial parameters do not match config");
  auto adam = nn::AdamState<float>::init(params);
  const nn::AdamHyper hyper{cfg.lr, 0.9, 0.999, 1e-8, cfg.clip};

  TrainReport rep;
  rep.divisor = cfg.divisor;
  rep.timesteps = static_cast<int>(train.timesteps);
  rep.features = static_cast<int>(train.features);
  rep.param_count = params.parameter_count();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.count());
  std::iota(order.begin(), order.end(), std::size_t{0});

  int iterations = 0;
  bool done = false;
  const auto t_start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const auto e_start = std::chrono::steady_clock::now();
    shuffle_indices(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t n =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const auto batch = nn::make_batch<float>(train, idx);
      auto lg = nn::loss_and_grad(params, batch);
      nn::adam_update(params, lg.grad, adam, hyper);
      rep.iters.push_back(
          {lg.loss, 100.0 * static_cast<double>(lg.correct) / static_cast<double>(n)});
      ++iterations;
      if (cfg.max_iterations > 0 && iterations >= cfg.max_iterations) {
        done = true;
        break;
      }
    }
    rep.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - e_start).count());
  }
  rep.total_minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count() / 60.0;
  rep.final_batch_acc = rep.iters.empty() ? 0.0 : rep.iters.back().minibatch_acc;
  rep.train_split_acc = evaluate(params, train);
  rep.test_acc = evaluate(params, test);

  if (out_params) *out_params = std::move(params);
  return rep;
}

std::vector<TrainReport> divisor_sweep(const ExperimentConfig& base,
                                       const LabeledImageSet& train,
                                       const LabeledImageSet& test,
                                       std::span<const int> divisors) {
  std::vector<TrainReport> out;
  for (int d : divisors) {
    ExperimentConfig cfg = base;
    cfg.divisor = d;
    const FeatureSet ftrain = build_feature_set(train, d);
    const FeatureSet ftest = build_feature_set(test, d);
    out.push_back(run_experiment(cfg, ftrain, ftest));
  }
  return out;
}

double timing_ratio(const TrainReport& a, const TrainReport& b) {
  if (a.total_minutes <= 0.0 || b.total_minutes <= 0.0)
    throw std::runtime_error("timing_ratio: zero duration");
  return b.total_minutes / a.total_minutes;
}

void write_summary_csv(std::ostream& os, std::span<const TrainReport> reports) {
  os << "divisor,timesteps,features,params,minutes,final_batch_train_acc,"
        "train_split_acc,test_acc"
     << kCrlf;
  for (const auto& r : reports) {
    os << r.divisor << ',' << r.timesteps << ',' << r.features << ',' << r.param_count << ','
       << fmt_g(r.total_minutes) << ',' << fmt_g(r.final_batch_acc) << ','
       << fmt_g(r.train_split_acc) << ',' << fmt_g(r.test_acc) << kCrlf;
  }
}

void write_curves_csv(std::ostream& os, std::span<const TrainReport> reports) {
  os << "divisor,iteration,loss,minibatch_acc" << kCrlf;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.iters.size(); ++i) {
      os << r.divisor << ',' << i << ',' << fmt_g(r.iters[i].loss) << ','
         << fmt_g(r.iters[i].minibatch_acc) << kCrlf;
    }
  }
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == ',') {
      row.push_back(field);
      field.clear();
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      row.push_back(field);
      field.clear();
      rows.push_back(row);
      row.clear();
      ++i;
    } else if (ch == '\n') {
      row.push_back(field);
      field.clear();
      rows.push_back(row);
      row.clear();
    } else {
      field.push_back(ch);
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace orpt::harness
