// Command-line front end for the ORPT feature pipeline.
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 state mismatch, 5 numeric failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "orpt/dataset.hpp"
#include "orpt/harness.hpp"
#include "orpt/matrix.hpp"
#include "orpt/numtheory.hpp"
#include "orpt/nn.hpp"
#include "orpt/subband.hpp"

namespace {

namespace fs = std::filesystem;
using namespace orpt;

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitState = 4;
constexpr int kExitNumeric = 5;

struct StateMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw FormatError("missing file: " + path, 0);
}

// ---------------------------------------------------------------------- build-matrix

int cmd_build_matrix(int n, const std::string& out) {
  const OrptMatrix m = build_matrix(n);
  if (out.empty()) {
    write_matrix_text(std::cout, m);
  } else {
    std::ofstream os(out);
    if (!os) throw FormatError("cannot open " + out + " for writing", 0);
    write_matrix_text(os, m);
  }
  std::cout << "column norms:";
  for (auto v : m.column_norms) std::cout << ' ' << v;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------- transform

ImagePlane read_plane_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path, 0);
  int n = 0;
  if (!(is >> n) || n < 1) throw FormatError("bad image header in " + path, 0);
  ImagePlane x;
  x.size = n;
  x.px.resize(static_cast<std::size_t>(n) * n);
  for (auto& v : x.px)
    if (!(is >> v)) throw FormatError("truncated image in " + path, 0);
  return x;
}

int cmd_transform(const std::string& in, int d, const std::string& out_prefix) {
  const ImagePlane x = read_plane_text(in);
  if (d < 1 || x.size % d != 0)
    throw std::domain_error("divisor must divide the image side");
  const auto rd = build_matrix(d);
  const auto op = analysis_operator(rd, x.size);
  const SubbandGrid y = transform_2d(op, x);

  for (int ci = 0; ci < d; ++ci) {
    for (int cj = 0; cj < d; ++cj) {
      const std::string path =
          out_prefix + "_" + std::to_string(ci) + "_" + std::to_string(cj) + ".txt";
      std::ofstream os(path);
      if (!os) throw FormatError("cannot open " + path + " for writing", 0);
      os << y.sub << "\n";
      for (int r = 0; r < y.sub; ++r) {
        for (int c = 0; c < y.sub; ++c) {
          if (c) os << ' ';
          os << y.at(ci, cj, r, c);
        }
        os << "\n";
      }
    }
  }
  const ImagePlane back = inverse_2d(op, y);
  double err = 0.0;
  for (std::size_t i = 0; i < x.px.size(); ++i)
    err = std::max(err, std::abs(x.px[i] - back.px[i]));
  std::cout << d * d << " channels of " << y.sub << "x" << y.sub
            << " written, round-trip error " << err << "\n";
  return 0;
}

// ---------------------------------------------------------------------- export-features

LabeledImageSet load_dataset(const std::string& dataset, const std::string& data_dir,
                             const std::string& split) {
  if (dataset == "mnist") {
    const std::string stem = split == "train" ? "train" : "t10k";
    const std::string imgs = data_dir + "/" + stem + "-images-idx3-ubyte";
    const std::string lbls = data_dir + "/" + stem + "-labels-idx1-ubyte";
    require_file(imgs);
    require_file(lbls);
    return load_mnist(imgs, lbls);
  }
  if (dataset == "cifar10") {
    std::vector<std::string> paths;
    if (split == "train") {
      for (int i = 1; i <= 5; ++i)
        paths.push_back(data_dir + "/data_batch_" + std::to_string(i) + ".bin");
    } else {
      paths.push_back(data_dir + "/test_batch.bin");
    }
    for (const auto& p : paths) require_file(p);
    return load_cifar10(paths);
  }
  throw std::domain_error("unknown dataset: " + dataset);
}

int cmd_export_features(const std::string& dataset, int d, const std::string& split,
                        const std::string& data_dir, const std::string& out) {
  const LabeledImageSet set = load_dataset(dataset, data_dir, split);
  if (d < 1 || set.side % d != 0)
    throw std::domain_error("divisor " + std::to_string(d) + " does not divide side " +
                            std::to_string(set.side));
  const FeatureSet fsfeat = build_feature_set(set, d);
  write_feature_set(out, fsfeat);
  std::cout << fsfeat.count() << ' ' << fsfeat.timesteps << ' ' << fsfeat.features << ' '
            << fsfeat.classes << "\n";
  return 0;
}

// ---------------------------------------------------------------------- train / sweep

void write_reports(const std::string& prefix, std::span<const harness::TrainReport> reports) {
  {
    std::ofstream os(prefix + "_summary.csv", std::ios::binary);
    if (!os) throw FormatError("cannot open " + prefix + "_summary.csv", 0);
    harness::write_summary_csv(os, reports);
  }
  std::ofstream os(prefix + "_curves.csv", std::ios::binary);
  if (!os) throw FormatError("cannot open " + prefix + "_curves.csv", 0);
  harness::write_curves_csv(os, reports);
}

int cmd_train(const harness::ExperimentConfig& cfg, const std::string& features,
              const std::string& test_features, const std::string& init,
              const std::string& out_prefix) {
  require_file(features);
  require_file(test_features);
  const FeatureSet train = read_feature_set(features);
  const FeatureSet test = read_feature_set(test_features);

  nn::RecurrentParams<float> init_params;
  const nn::RecurrentParams<float>* initp = nullptr;
  if (!init.empty()) {
    require_file(init);
    init_params = nn::load_checkpoint(init);
    if (init_params.kind != cfg.cell || init_params.direction != cfg.direction ||
        init_params.input_dim != static_cast<int>(train.features) ||
        init_params.hidden_dim != cfg.hidden ||
        init_params.classes != static_cast<int>(train.classes))
      throw StateMismatch("checkpoint does not match the requested configuration");
    initp = &init_params;
  }

  nn::RecurrentParams<float> trained;
  const harness::TrainReport rep =
      harness::run_experiment(cfg, train, test, &trained, initp);
  write_reports(out_prefix, std::span<const harness::TrainReport>(&rep, 1));
  nn::save_checkpoint(out_prefix + ".ckpt", trained);
  std::cout << "params " << rep.param_count << " minutes " << rep.total_minutes
            << " train% " << rep.train_split_acc << " test% " << rep.test_acc << "\n";
  return 0;
}

int cmd_sweep(harness::ExperimentConfig cfg, const std::string& data_dir,
              const std::string& divisors_arg, bool quick, const std::string& out_prefix) {
  std::vector<int> divisors;
  std::stringstream ss(divisors_arg);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) divisors.push_back(std::stoi(tok));

  LabeledImageSet train = load_dataset(cfg.dataset, data_dir, "train");
  LabeledImageSet test = load_dataset(cfg.dataset, data_dir, "test");
  if (quick) {
    train = subset(train, 10000);
    test = subset(test, 2000);
    cfg.hidden = 64;
    cfg.epochs = 2;
  }
  for (int d : divisors)
    if (d < 1 || train.side % d != 0)
      throw std::domain_error("divisor " + std::to_string(d) + " does not divide side " +
                              std::to_string(train.side));

  const auto reports = harness::divisor_sweep(cfg, train, test, divisors);
  write_reports(out_prefix, reports);
  for (const auto& r : reports)
    std::cout << "d=" << r.divisor << " T=" << r.timesteps << " F=" << r.features
              << " params=" << r.param_count << " minutes=" << r.total_minutes
              << " train%=" << r.train_split_acc << " test%=" << r.test_acc << "\n";
  return 0;
}

// ---------------------------------------------------------------------- verify

int cmd_verify(std::uint64_t seed) {
  int failures = 0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto check = [&failures](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    bool ok = true;
    for (int n = 2; n <= 128 && ok; ++n) {
      try {
        build_matrix(n);  // orthogonality and column count asserted inside
      } catch (const std::exception&) {
        ok = false;
      }
    }
    check("orthogonality and completeness, N = 2..128", ok);
  }
  {
    static const std::int64_t r6[6][6] = {{1, 1, 2, 0, 2, 0},  {1, -1, -1, 1, 1, -1},
                                          {1, 1, -1, -1, -1, -1}, {1, -1, 2, 0, -2, 0},
                                          {1, 1, -1, 1, -1, 1},   {1, -1, -1, -1, 1, 1}};
    const auto m = build_matrix(6);
    bool ok = true;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) ok = ok && m.at(r, c) == r6[r][c];
    check("golden R6 matrix", ok);
  }
  {
    bool ok = true;
    for (int n = 2; n <= 64 && ok; ++n) {
      const auto m = build_matrix(n);
      std::vector<double> x(static_cast<std::size_t>(n));
      for (int rep = 0; rep < 5; ++rep) {
        for (auto& v : x) v = uni(rng);
        const auto beta = forward_1d(m, x);
        const auto back = inverse_1d(m, beta);
        double norm2 = 0.0, parseval = 0.0;
        for (int i = 0; i < n; ++i) {
          ok = ok && std::abs(back[static_cast<std::size_t>(i)] -
                              x[static_cast<std::size_t>(i)]) < 1e-10;
          norm2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
          parseval += beta.values[static_cast<std::size_t>(i)] *
                      beta.values[static_cast<std::size_t>(i)] /
                      static_cast<double>(m.column_norms[static_cast<std::size_t>(i)]);
        }
        ok = ok && std::abs(parseval - norm2) <= 1e-9 * std::max(1.0, norm2);
      }
    }
    check("1-D round trip and Parseval, N = 2..64", ok);
  }
  {
    bool ok = true;
    for (int side : {28, 32}) {
      for (int d : nt::divisors(side)) {
        const auto rd = build_matrix(static_cast<int>(d));
        const auto op = analysis_operator(rd, side);
        ImagePlane x;
        x.size = side;
        x.px.resize(static_cast<std::size_t>(side) * side);
        for (int rep = 0; rep < 3; ++rep) {
          for (auto& v : x.px) v = uni(rng);
          const auto y = transform_2d(op, x);
          const auto back = inverse_2d(op, y);
          for (std::size_t i = 0; i < x.px.size(); ++i)
            ok = ok && std::abs(back.px[i] - x.px[i]) < 1e-9;
        }
      }
    }
    check("2-D round trip, MNIST and CIFAR shapes, all divisors", ok);
  }
  {
    bool ok = true;
    std::vector<SequenceSample> samples;
    for (int s = 0; s < 2; ++s) {
      SequenceSample smp;
      smp.timesteps = 4;
      smp.features = 2;
      smp.label = s;
      smp.values.resize(8);
      for (auto& v : smp.values) v = uni(rng);
      samples.push_back(smp);
    }
    for (auto kind : {nn::CellKind::Rnn, nn::CellKind::IndRnn, nn::CellKind::Lstm}) {
      for (auto dir : {nn::Direction::Forward, nn::Direction::Bidirectional}) {
        const auto p = nn::make_params<double>(kind, dir, 2, 3, 3, seed);
        ok = ok && nn::gradient_check(p, samples) < 1e-5;
      }
    }
    check("BPTT gradients vs central finite differences", ok);
  }
  {
    bool ok = true;
    std::vector<double> x(64);
    for (int rep = 0; rep < 100 && ok; ++rep) {
      for (auto& v : x) v = uni(rng);
      nn::ConvSpec spec;
      spec.dilation = 1 + static_cast<int>(rng() % 4);
      spec.taps.resize(1 + rng() % 5);
      for (auto& t : spec.taps) t = uni(rng);
      const auto base = nn::dilated_causal_conv(spec, x);
      const std::size_t k = rng() % 32;
      auto perturbed = x;
      perturbed[k + 16] += 1.0;  // strictly after position k
      const auto mod = nn::dilated_causal_conv(spec, perturbed);
      for (std::size_t i = 0; i <= k; ++i) ok = ok && mod[i] == base[i];
    }
    check("dilated convolution causality", ok);
  }
  std::cout << (failures == 0 ? "all suites passed\n" : "FAILURES: ") ;
  if (failures) std::cout << failures << "\n";
  return failures == 0 ? 0 : kExitNumeric;
}

// ---------------------------------------------------------------------- bench

int cmd_bench(std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  {
    const auto m = build_matrix(28);
    std::vector<double> x(28);
    for (auto& v : x) v = uni(rng);
    const int reps = 20000;
    const auto t0 = clock::now();
    double sink = 0.0;
    for (int i = 0; i < reps; ++i) sink += forward_1d(m, x).values[0];
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << "forward_1d n=28: " << static_cast<long>(reps / secs) << " ops/sec (sink "
              << sink << ")\n";
  }
  {
    const auto set = make_synthetic_set(2000, 28, 1, 10, seed);
    std::vector<ImagePlane> planes;
    planes.reserve(set.count());
    for (std::size_t i = 0; i < set.count(); ++i) planes.push_back(set.plane(i, 0));
    const auto rd = build_matrix(2);
    const auto op = analysis_operator(rd, 28);

    auto t0 = clock::now();
    const auto serial = transform_2d_batch_serial(op, planes);
    const double s_secs = std::chrono::duration<double>(clock::now() - t0).count();
    t0 = clock::now();
    const auto parallel = transform_2d_batch(op, planes);
    const double p_secs = std::chrono::duration<double>(clock::now() - t0).count();
    double diff = 0.0;
    for (std::size_t i = 0; i < serial.size(); ++i)
      for (std::size_t k = 0; k < serial[i].data.size(); ++k)
        diff = std::max(diff, std::abs(serial[i].data[k] - parallel[i].data[k]));
    std::cout << "transform_2d d=2 batch 2000: serial "
              << static_cast<long>(planes.size() / s_secs) << " img/sec, openmp "
              << static_cast<long>(planes.size() / p_secs) << " img/sec, speedup "
              << s_secs / p_secs << ", max diff " << diff << "\n";
  }
  {
    const auto p = nn::make_params<float>(nn::CellKind::Lstm, nn::Direction::Forward, 4, 128,
                                          10, seed);
    nn::HiddenState<float> s;
    s.h = nn::Vec<float>::Zero(128);
    s.c = nn::Vec<float>::Zero(128);
    nn::Vec<float> x(4);
    for (int i = 0; i < 4; ++i) x(i) = static_cast<float>(uni(rng));
    const int reps = 200000;
    const auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) s = nn::lstm_step(p.fwd, s, x);
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << "lstm_step M=128 F=4: " << static_cast<long>(reps / secs)
              << " steps/sec (sink " << s.h(0) << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal Ramanujan periodic transform pipeline"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Cap OpenMP worker count (0 = default)");

  // build-matrix
  auto* bm = app.add_subcommand("build-matrix", "Construct and export the integer matrix");
  int bm_n = 0;
  std::string bm_out;
  bm->add_option("--n", bm_n, "Matrix size (1..4096)")->required();
  bm->add_option("--out", bm_out, "Output path (default stdout)");

  // transform
  auto* tr = app.add_subcommand("transform", "Apply the 2-D transform to a text image");
  std::string tr_in, tr_out = "channel";
  int tr_d = 2;
  tr->add_option("--in", tr_in, "Input image: side, then side*side values")->required();
  tr->add_option("--d", tr_d, "Divisor of the image side")->required();
  tr->add_option("--out", tr_out, "Output file prefix");

  // export-features
  auto* ef = app.add_subcommand("export-features", "Build a feature-set file from a dataset");
  std::string ef_dataset, ef_split = "train", ef_dir = ".", ef_out;
  int ef_d = 1;
  ef->add_option("--dataset", ef_dataset, "mnist or cifar10")
      ->required()
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  ef->add_option("--d", ef_d, "Divisor of the image side")->required();
  ef->add_option("--split", ef_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  ef->add_option("--data-dir", ef_dir, "Directory with the dataset files");
  ef->add_option("--out", ef_out, "Output feature-set path")->required();

  // shared training options
  harness::ExperimentConfig cfg;
  std::string cell_name = "lstm";
  bool bidirectional = false;

  auto add_training_options = [&](CLI::App* sc) {
    sc->add_option("--cell", cell_name, "rnn, indrnn, or lstm")
        ->check(CLI::IsMember({"rnn", "indrnn", "lstm"}));
    sc->add_flag("--bidirectional", bidirectional, "Bidirectional scan");
    sc->add_option("--hidden", cfg.hidden, "Hidden state size");
    sc->add_option("--batch", cfg.batch, "Minibatch size");
    sc->add_option("--epochs", cfg.epochs, "Training epochs");
    sc->add_option("--iterations", cfg.max_iterations, "Cap on total minibatches");
    sc->add_option("--seed", cfg.seed, "RNG seed");
    sc->add_option("--lr", cfg.lr, "Adam learning rate");
    sc->add_option("--clip", cfg.clip, "Global gradient-norm clip");
  };

  // train
  auto* tn = app.add_subcommand("train", "Train on prebuilt feature-set files");
  std::string tn_features, tn_test, tn_init, tn_out = "train", tn_config;
  tn->add_option("--features", tn_features, "Training feature-set file")->required();
  tn->add_option("--test-features", tn_test, "Test feature-set file")->required();
  tn->add_option("--init", tn_init, "Initial checkpoint");
  tn->add_option("--out", tn_out, "Output prefix for CSVs and checkpoint");
  tn->add_option("--config", tn_config, "key=value config file (overridden by flags)");
  add_training_options(tn);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Divisor sweep over a raw dataset");
  std::string sw_dataset = "mnist", sw_dir = ".", sw_divisors, sw_out = "sweep";
  bool sw_quick = false;
  sw->add_option("--dataset", sw_dataset, "mnist or cifar10")
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  sw->add_option("--data-dir", sw_dir, "Directory with the dataset files");
  sw->add_option("--divisors", sw_divisors, "Comma-separated divisor list")->required();
  sw->add_flag("--quick", sw_quick, "Desk-scale profile: 10k/2k subset, hidden 64, 2 epochs");
  sw->add_option("--out", sw_out, "Output prefix for CSVs");
  add_training_options(sw);

  // verify
  auto* vf = app.add_subcommand("verify", "Run the invariant suites");
  std::uint64_t vf_seed = 1;
  vf->add_option("--seed", vf_seed, "RNG seed");

  // bench
  auto* bn = app.add_subcommand("bench", "Kernel throughput, serial vs OpenMP");
  std::uint64_t bn_seed = 1;
  bn->add_option("--seed", bn_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  const auto parse_cell = [&]() {
    if (cell_name == "rnn") cfg.cell = nn::CellKind::Rnn;
    else if (cell_name == "indrnn") cfg.cell = nn::CellKind::IndRnn;
    else cfg.cell = nn::CellKind::Lstm;
    cfg.direction = bidirectional ? nn::Direction::Bidirectional : nn::Direction::Forward;
  };

  try {
    if (bm->parsed()) return cmd_build_matrix(bm_n, bm_out);
    if (tr->parsed()) return cmd_transform(tr_in, tr_d, tr_out);
    if (ef->parsed()) return cmd_export_features(ef_dataset, ef_d, ef_split, ef_dir, ef_out);
    if (tn->parsed()) {
      if (!tn_config.empty()) {
        require_file(tn_config);
        const harness::ExperimentConfig flags = cfg;
        cfg = harness::load_config(tn_config);
        // explicit flags override the file
        if (tn->count("--hidden")) cfg.hidden = flags.hidden;
        if (tn->count("--batch")) cfg.batch = flags.batch;
        if (tn->count("--epochs")) cfg.epochs = flags.epochs;
        if (tn->count("--iterations")) cfg.max_iterations = flags.max_iterations;
        if (tn->count("--seed")) cfg.seed = flags.seed;
        if (tn->count("--lr")) cfg.lr = flags.lr;
        if (tn->count("--clip")) cfg.clip = flags.clip;
        if (tn->count("--cell") || tn->count("--bidirectional")) {
          const auto saved = cfg;
          parse_cell();
          if (!tn->count("--cell")) cfg.cell = saved.cell;
          if (!tn->count("--bidirectional")) cfg.direction = saved.direction;
        }
      } else {
        parse_cell();
      }
      return cmd_train(cfg, tn_features, tn_test, tn_init, tn_out);
    }
    if (sw->parsed()) {
      parse_cell();
      cfg.dataset = sw_dataset;
      return cmd_sweep(cfg, sw_dir, sw_divisors, sw_quick, sw_out);
    }
    if (vf->parsed()) return cmd_verify(vf_seed);
    if (bn->parsed()) return cmd_bench(bn_seed);
  } catch (const StateMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitState;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
