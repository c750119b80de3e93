#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "orpt/dataset.hpp"
#include "orpt/featureset.hpp"
#include "orpt/nn.hpp"

namespace orpt::harness {

struct ExperimentConfig {
  std::string dataset = "mnist";
  int divisor = 1;
  nn::CellKind cell = nn::CellKind::Lstm;
  nn::Direction direction = nn::Direction::Forward;
  int hidden = 128;
  int batch = 128;
  int epochs = 5;
  int max_iterations = -1;  // cap on total minibatches when > 0
  std::uint64_t seed = 1;
  double lr = 1e-3;
  double clip = 1.0;
};

/// Simple key=value config file; unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);

struct IterRecord {
  double loss = 0.0;
  double minibatch_acc = 0.0;  // percent
};

struct TrainReport {
  int divisor = 0;
  int timesteps = 0;
  int features = 0;
  std::size_t param_count = 0;
  std::vector<IterRecord> iters;
  std::vector<double> epoch_seconds;
  double final_batch_acc = 0.0;   // running accuracy of the last minibatch, percent
  double train_split_acc = 0.0;   // full train-split evaluation, percent
  double test_acc = 0.0;          // full test-split evaluation, percent
  double total_minutes = 0.0;     // training wall clock, excluding final evals
};

/// Trains a single-layer net on the feature sets with seeded determinism
/// and evaluates on both full splits. Returns the trained parameters via
/// out_params when non-null.
TrainReport run_experiment(const ExperimentConfig& cfg, const FeatureSet& train,
                           const FeatureSet& test,
                           nn::RecurrentParams<float>* out_params = nullptr,
                           const nn::RecurrentParams<float>* init_params = nullptr);

/// Full-split accuracy in percent, evaluated in deterministic batches.
double evaluate(const nn::RecurrentParams<float>& p, const FeatureSet& fs, int batch = 256);

/// One experiment per divisor, features built in memory from the raw sets.
std::vector<TrainReport> divisor_sweep(const ExperimentConfig& base,
                                       const LabeledImageSet& train,
                                       const LabeledImageSet& test,
                                       std::span<const int> divisors);

/// total_minutes ratio b / a.
double timing_ratio(const TrainReport& a, const TrainReport& b);

/// RFC 4180 CSV emitters. The summary holds one row per report; curves hold
/// one row per iteration and contain no wall-clock fields, so they are
/// bitwise reproducible under a fixed seed and thread count.
void write_summary_csv(std::ostream& os, std::span<const TrainReport> reports);
void write_curves_csv(std::ostream& os, std::span<const TrainReport> reports);

/// Minimal CSV reader for round-trip checks: rows of unquoted fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace orpt::harness
