// manifold-ad: generate benchmark data, fit a manifold learner and flag
// anomalies, run repetition sweeps, and score labeled manifolds.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "manifold_ad/json_io.hpp"
#include "manifold_ad/manifold_ad.hpp"

namespace fs = std::filesystem;
using namespace manifold_ad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("MANIFOLD_AD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

// Learner flags shared by fit-detect and benchmark. Unset flags leave the
// (default or JSON-provided) values untouched.
struct LearnerFlags {
  std::optional<int> restarts, max_iter, epochs, batch_size;
  std::optional<double> tol, fix_delta, step_size;
  std::optional<std::vector<int>> hidden;
  std::optional<std::string> activation, center, space;

  void attach(CLI::App* app) {
    app->add_option("--restarts", restarts, "LMGP optimizer restarts");
    app->add_option("--max-iter", max_iter, "LMGP iterations per restart");
    app->add_option("--tol", tol, "LMGP gradient-norm tolerance");
    app->add_option("--fix-delta", fix_delta, "pin the LMGP nugget to this value instead of estimating it");
    app->add_option("--epochs", epochs, "autoencoder epochs");
    app->add_option("--batch-size", batch_size, "autoencoder mini-batch size");
    app->add_option("--step-size", step_size, "autoencoder Adam step size");
    app->add_option("--hidden", hidden, "autoencoder hidden widths between input and bottleneck")->delimiter(',');
    app->add_option("--activation", activation, "tanh or relu");
    app->add_option("--center", center, "manifold center: auto, origin or centroid");
    app->add_option("--space", space, "cluster on 'distance' (1-D) or 'coordinates' (2-D)");
  }

  void apply(LearnerOptions& o) const {
    if (restarts) o.lmgp.n_restarts = *restarts;
    if (max_iter) o.lmgp.max_iter = *max_iter;
    if (tol) o.lmgp.tol = *tol;
    if (fix_delta) {
      o.lmgp.estimate_delta = false;
      o.lmgp.delta_init = *fix_delta;
    }
    if (epochs) o.autoencoder.epochs = *epochs;
    if (batch_size) o.autoencoder.batch_size = *batch_size;
    if (step_size) o.autoencoder.step_size = *step_size;
    if (hidden) o.autoencoder.hidden_widths = *hidden;
    if (activation) o.autoencoder.activation = parse_activation(*activation);
    if (center) o.detect.center = parse_center(*center);
    if (space) o.detect.space = parse_space(*space);
  }
};

void apply_learner_json(const json& j, LearnerOptions& o) {
  const json& lo = j.contains("learner_opts") ? j.at("learner_opts") : j;
  if (lo.contains("lmgp")) apply_json(lo.at("lmgp"), o.lmgp);
  if (lo.contains("autoencoder")) apply_json(lo.at("autoencoder"), o.autoencoder);
  if (lo.contains("detect")) apply_json(lo.at("detect"), o.detect);
}

struct GenerateArgs {
  std::string benchmark;
  std::optional<double> rate, noise_sd, a_low, a_high;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::string out, config;
};

int cmd_generate(const GenerateArgs& a) {
  ExperimentSpec spec;
  spec.anomaly_rates = {0.1};
  if (!a.config.empty()) apply_json(read_json_file(a.config), spec);
  if (a.benchmark.empty() && a.config.empty()) throw InputError("generate needs --benchmark");

  std::string name = a.benchmark;
  std::replace(name.begin(), name.end(), '-', '_');
  const bool clean = name == "wing" || name == "borehole";
  if (!name.empty() && !clean) spec.benchmark = parse_benchmark(name);
  if (spec.benchmark == Benchmark::csv_file && !clean) throw InputError("generate cannot use the csv_file benchmark");
  if (a.rate) spec.anomaly_rates = {*a.rate};
  if (a.n) spec.n_total = *a.n;
  if (a.seed) spec.seed = *a.seed;
  if (a.noise_sd) spec.noise_sd = *a.noise_sd;
  if (a.a_low) spec.a_low = *a.a_low;
  if (a.a_high) spec.a_high = *a.a_high;
  if (spec.anomaly_rates.size() != 1) throw InputError("generate takes exactly one anomaly rate");

  Dataset d;
  const auto data_seed = derive_seed(spec.seed, {0, 0, 0});
  auto ranges_with = [&](InputRanges r) {
    for (const auto& o : spec.range_overrides) override_range(r, o.name, o.lo, o.hi);
    return r;
  };
  if (name == "wing") {
    d = gen_wing({spec.n_total, 0, 0}, spec.noise_sd.value_or(5.0), data_seed, ranges_with(wing_ranges()));
  } else if (name == "borehole") {
    d = gen_borehole(spec.n_total, spec.noise_sd.value_or(3.40), data_seed, ranges_with(borehole_ranges()));
  } else {
    validate(spec);
    d = detail::make_cell_dataset(spec, nullptr, 0, 0);
  }
  save_csv(d, a.out);
  std::cout << "rows=" << d.n() << " anomalies=" << d.anomaly_count() << " file=" << a.out << "\n";
  return kExitOk;
}

struct FitDetectArgs {
  std::string input, out_dir, learner = "lmgp", config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  LearnerFlags flags;
};

int cmd_fit_detect(const FitDetectArgs& a) {
  const Dataset d = load_csv(a.input);
  LearnerOptions opts;
  std::uint64_t seed = 0;
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    apply_learner_json(j, opts);
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  }
  a.flags.apply(opts);
  if (a.seed) seed = *a.seed;
  const Learner learner = parse_learner(a.learner);
  ensure_dir(a.out_dir);

  json report;
  report["input"] = a.input;
  report["learner"] = to_string(learner);
  report["seed"] = seed;
  Manifold m;
  if (learner == Learner::lmgp) {
    auto o = opts.lmgp;
    o.seed = seed;
    o.threads = resolve_threads(a.threads);
    const auto f = fit(d, o);
    m = f.manifold;
    report["fit"] = to_json(f.report);
    report["fit"]["sigma2"] = f.params.sigma2;
    report["fit"]["delta"] = f.params.delta;
    report["fit"]["beta"] = f.params.beta;
    report["fit"]["omega"] = std::vector<double>(f.params.omega.data(), f.params.omega.data() + f.params.omega.size());
  } else {
    const auto model = train(d, opts.autoencoder.spec_for(d, seed));
    m = secondary_manifold(model);
    std::ostringstream trace;
    trace << "epoch,loss\n";
    for (std::size_t e = 0; e < model.training_loss_trace.size(); ++e)
      trace << e + 1 << ',' << format_real(model.training_loss_trace[e]) << '\n';
    write_file_atomic(fs::path(a.out_dir) / "trace.csv", trace.str());
    report["fit"] = {{"epochs", model.training_loss_trace.size()},
                     {"initial_loss", model.initial_loss},
                     {"final_loss", model.training_loss_trace.empty() ? model.initial_loss
                                                                       : model.training_loss_trace.back()},
                     {"step_halvings", model.step_halvings},
                     {"untrained", model.untrained},
                     {"degenerate_axis", m.degenerate_axis}};
  }
  const auto det = detect(m, d.truth, opts.detect);
  report["detection"] = to_json(det);
  write_file_atomic(fs::path(a.out_dir) / "manifold.csv", manifold_to_csv(m, d.truth, det.predicted));
  write_file_atomic(fs::path(a.out_dir) / "report.json", report.dump(2) + "\n");

  std::cout << "learner=" << to_string(learner) << " normal=" << det.cluster_sizes[0]
            << " anomalous=" << det.cluster_sizes[1];
  if (det.metrics)
    std::cout << " f1=" << det.metrics->f1 << " precision=" << det.metrics->precision << " gmean=" << det.metrics->gmean;
  if (det.degenerate) std::cout << " degenerate";
  if (det.untrained) std::cout << " untrained";
  std::cout << "\n";
  return kExitOk;
}

struct BenchmarkArgs {
  std::string spec_file, out_dir;
  std::optional<std::string> benchmark, csv_file;
  std::optional<std::vector<double>> rates;
  std::optional<std::vector<std::string>> learners;
  std::optional<int> n, repetitions;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  LearnerFlags flags;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  ExperimentSpec spec;
  if (!a.spec_file.empty()) apply_json(read_json_file(a.spec_file), spec);
  if (a.benchmark) spec.benchmark = parse_benchmark(*a.benchmark);
  if (a.csv_file) spec.csv_file = *a.csv_file;
  if (a.rates) spec.anomaly_rates = *a.rates;
  if (a.learners) {
    spec.learners.clear();
    for (const auto& l : *a.learners) spec.learners.push_back(parse_learner(l));
  }
  if (a.n) spec.n_total = *a.n;
  if (a.repetitions) spec.repetitions = *a.repetitions;
  if (a.seed) spec.seed = *a.seed;
  a.flags.apply(spec.learner_opts);
  validate(spec);
  ensure_dir(a.out_dir);

  const auto result = run(spec, resolve_threads(a.threads));
  const auto summary = aggregate(result);
  const fs::path dir(a.out_dir);
  write_file_atomic(dir / "spec.json", to_json(spec).dump(2) + "\n");
  write_file_atomic(dir / "sweep.csv", sweep_to_csv(result));
  write_file_atomic(dir / "summary.csv", summary_to_csv(summary));

  int failed = 0;
  for (const auto& r : result.records) failed += r.failed;
  for (const auto& row : summary) {
    std::cout << row.benchmark << " rate=" << row.rate << " learner=" << to_string(row.learner) << " ok=" << row.n_ok;
    if (!row.absent()) std::cout << " f1_median=" << row.f1.median << " gmean_median=" << row.gmean.median;
    std::cout << "\n";
  }
  if (failed) std::cerr << failed << " cell(s) failed; see sweep.csv\n";
  return kExitOk;
}

int cmd_score(const std::string& path) {
  const auto tab = load_manifold_csv(path);
  if (!tab.truth || !tab.predicted) throw InputError(path + ": scoring needs truth and predicted columns");
  const auto s = score(*tab.predicted, *tab.truth);
  json j = to_json(s.metrics);
  j["confusion"] = to_json(s.confusion);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised anomaly detection on learned 2-D manifolds"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a benchmark dataset CSV");
  g->add_option("--benchmark", gen.benchmark,
                "wing-multisource, wing-corrupt, borehole-corrupt, or wing/borehole (no anomalies)");
  g->add_option("--rate", gen.rate, "anomaly rate in (0,1)");
  g->add_option("--n", gen.n, "total number of samples");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--noise-sd", gen.noise_sd, "response noise standard deviation");
  g->add_option("--a-low", gen.a_low, "lower bound of the corruption factor a");
  g->add_option("--a-high", gen.a_high, "upper bound of the corruption factor a");
  g->add_option("--config", gen.config, "JSON config with experiment-spec fields");
  g->add_option("--out", gen.out, "output CSV path")->required();

  FitDetectArgs fd;
  auto* f = app.add_subcommand("fit-detect", "fit a manifold learner on a CSV and flag anomalies");
  f->add_option("--input", fd.input, "dataset CSV")->required();
  f->add_option("--out-dir", fd.out_dir, "directory for manifold.csv and report.json")->required();
  f->add_option("--learner", fd.learner, "lmgp or autoencoder");
  f->add_option("--seed", fd.seed, "random seed");
  f->add_option("--config", fd.config, "JSON file with learner_opts");
  f->add_option("--threads", fd.threads, "worker threads (default: $MANIFOLD_AD_THREADS or all cores)");
  fd.flags.attach(f);

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "run an anomaly-rate sweep with repetitions");
  b->add_option("--spec", bm.spec_file, "JSON experiment spec");
  b->add_option("--out-dir", bm.out_dir, "directory for sweep.csv and summary.csv")->required();
  b->add_option("--benchmark", bm.benchmark, "wing-multisource, wing-corrupt, borehole-corrupt or csv-file");
  b->add_option("--csv-file", bm.csv_file, "dataset for the csv-file benchmark");
  b->add_option("--rates", bm.rates, "anomaly rates")->delimiter(',');
  b->add_option("--learners", bm.learners, "lmgp,autoencoder")->delimiter(',');
  b->add_option("--n", bm.n, "samples per dataset");
  b->add_option("--repetitions", bm.repetitions, "repetitions per rate");
  b->add_option("--seed", bm.seed, "base seed");
  b->add_option("--threads", bm.threads, "worker threads (default: $MANIFOLD_AD_THREADS or all cores)");
  bm.flags.attach(b);

  std::string score_path;
  auto* s = app.add_subcommand("score", "compute F1, precision and G-mean from a manifold CSV");
  s->add_option("--manifold", score_path, "manifold CSV with truth and predicted columns")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*f) return cmd_fit_detect(fd);
    if (*b) return cmd_benchmark(bm);
    if (*s) return cmd_score(score_path);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
