// Repetition harness: anomaly-rate sweeps over the analytic benchmarks (or a
// user CSV), one dataset per (rate, repetition) cell shared by all learners.
//
// Seeds are derived with splitmix64 from (spec.seed, rate index, repetition
// index, stream tag), so every cell is reproducible on its own and cells may
// run in any order or concurrently.

#ifndef MANIFOLD_AD_BENCH_HPP
#define MANIFOLD_AD_BENCH_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "manifold_ad/autoencoder.hpp"
#include "manifold_ad/csv.hpp"
#include "manifold_ad/datagen.hpp"
#include "manifold_ad/detect.hpp"
#include "manifold_ad/lmgp.hpp"

namespace manifold_ad {

enum class Benchmark { wing_multisource, wing_corrupt, borehole_corrupt, csv_file };

inline std::string to_string(Benchmark b) {
  switch (b) {
    case Benchmark::wing_multisource: return "wing_multisource";
    case Benchmark::wing_corrupt: return "wing_corrupt";
    case Benchmark::borehole_corrupt: return "borehole_corrupt";
    case Benchmark::csv_file: return "csv_file";
  }
  return "?";
}

/// Accepts underscores or dashes ("wing-multisource").
inline Benchmark parse_benchmark(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "wing_multisource") return Benchmark::wing_multisource;
  if (s == "wing_corrupt") return Benchmark::wing_corrupt;
  if (s == "borehole_corrupt") return Benchmark::borehole_corrupt;
  if (s == "csv_file") return Benchmark::csv_file;
  throw InputError("unknown benchmark '" + s + "'");
}

inline Learner parse_learner(const std::string& s) {
  if (s == "lmgp") return Learner::lmgp;
  if (s == "autoencoder" || s == "ae") return Learner::autoencoder;
  throw InputError("unknown learner '" + s + "'");
}

/// Autoencoder settings independent of the dataset's input width.
struct AeOptions {
  std::vector<int> hidden_widths{32, 8};  // between the input and the scalar bottleneck
  Activation activation = Activation::tanh;
  int epochs = 2000;
  int batch_size = 64;
  double step_size = 1e-3;

  [[nodiscard]] MlpSpec spec_for(const Dataset& d, std::uint64_t seed) const {
    MlpSpec s;
    s.layer_widths.push_back(autoencoder_input_width(d));
    s.layer_widths.insert(s.layer_widths.end(), hidden_widths.begin(), hidden_widths.end());
    s.layer_widths.push_back(1);
    s.activation = activation;
    s.seed = seed;
    s.epochs = epochs;
    s.batch_size = batch_size;
    s.step_size = step_size;
    return s;
  }
};

struct LearnerOptions {
  LmgpFitOptions lmgp;
  AeOptions autoencoder;
  DetectOptions detect;
};

struct ExperimentSpec {
  Benchmark benchmark = Benchmark::wing_corrupt;
  std::vector<double> anomaly_rates{0.05, 0.1, 0.2, 0.3};
  int n_total = 500;
  int repetitions = 20;
  std::vector<Learner> learners{Learner::lmgp, Learner::autoencoder};
  std::uint64_t seed = 0;
  std::optional<double> noise_sd;  // benchmark default when absent: 5 (wing), 3.40 (borehole)
  std::string csv_file;            // source data for Benchmark::csv_file
  std::vector<InputRange> range_overrides;
  double a_low = 1.0;
  double a_high = 2.0;
  LearnerOptions learner_opts;
};

inline void validate(const ExperimentSpec& s) {
  if (s.repetitions < 1) throw InputError("repetitions must be at least 1");
  if (s.learners.empty()) throw InputError("at least one learner is required");
  if (s.benchmark != Benchmark::csv_file) {
    if (s.anomaly_rates.empty()) throw InputError("at least one anomaly rate is required");
    if (s.n_total < 4) throw InputError("n_total must be at least 4");
    if (!s.csv_file.empty()) throw InputError("csv_file is only valid with the csv_file benchmark");
  } else if (s.csv_file.empty()) {
    throw InputError("the csv_file benchmark needs a csv_file path");
  }
  for (double r : s.anomaly_rates)
    if (!(r > 0.0 && r < 1.0)) throw InputError("anomaly rates must lie in (0,1)");
  if (s.noise_sd && !(*s.noise_sd >= 0.0)) throw InputError("noise_sd must be non-negative");
}

struct SweepRecord {
  std::string benchmark;
  double rate = 0.0;
  int rate_index = 0;
  Learner learner = Learner::lmgp;
  int repetition = 0;
  double f1 = std::numeric_limits<double>::quiet_NaN();
  double precision = std::numeric_limits<double>::quiet_NaN();
  double gmean = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  bool failed = false;
  std::string error;
  int n_anomalous = 0;
  int n_normal = 0;
  // Mean distance to the manifold center of true anomalies and true normals.
  double anomaly_mean_distance = std::numeric_limits<double>::quiet_NaN();
  double normal_mean_distance = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SweepRecord> records;  // ordered by (rate, repetition, learner)
};

namespace detail {

inline Dataset make_cell_dataset(const ExperimentSpec& spec, const Dataset* base, std::size_t rate_index,
                                 int repetition) {
  const double rate = spec.anomaly_rates.empty() ? 0.0 : spec.anomaly_rates[rate_index];
  const auto data_seed = derive_seed(spec.seed, {rate_index, static_cast<std::uint64_t>(repetition), 0});
  AnomalySpec as;
  as.mechanism = Mechanism::output_corruption;
  as.anomaly_rate = rate;
  as.a_low = spec.a_low;
  as.a_high = spec.a_high;
  as.seed = derive_seed(spec.seed, {rate_index, static_cast<std::uint64_t>(repetition), 1});

  auto ranges_with = [&](InputRanges r) {
    for (const auto& o : spec.range_overrides) override_range(r, o.name, o.lo, o.hi);
    return r;
  };
  switch (spec.benchmark) {
    case Benchmark::wing_multisource:
      return gen_wing(wing_multisource_split(spec.n_total, rate), spec.noise_sd.value_or(5.0), data_seed,
                      ranges_with(wing_ranges()));
    case Benchmark::wing_corrupt:
      return corrupt_outputs(
          gen_wing({spec.n_total, 0, 0}, spec.noise_sd.value_or(5.0), data_seed, ranges_with(wing_ranges())), as);
    case Benchmark::borehole_corrupt:
      return corrupt_outputs(gen_borehole(spec.n_total, spec.noise_sd.value_or(3.40), data_seed,
                                          ranges_with(borehole_ranges())),
                             as);
    case Benchmark::csv_file:
      if (base->anomaly_count() > 0) return *base;
      return corrupt_outputs(*base, as);
  }
  throw InputError("unhandled benchmark");
}

inline void fill_separation(SweepRecord& rec, const DetectionReport& rep, const std::vector<Label>& truth) {
  double s[2] = {0.0, 0.0};
  int c[2] = {0, 0};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int k = truth[i] == Label::anomalous ? 1 : 0;
    s[k] += rep.distances(static_cast<Eigen::Index>(i));
    ++c[k];
  }
  rec.normal_mean_distance = c[0] ? s[0] / c[0] : std::numeric_limits<double>::quiet_NaN();
  rec.anomaly_mean_distance = c[1] ? s[1] / c[1] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Fits one learner on one dataset and scores the detection; failures are recorded, not thrown.
inline SweepRecord run_cell(const Dataset& d, Learner learner, const LearnerOptions& opts, std::uint64_t seed) {
  SweepRecord rec;
  rec.learner = learner;
  rec.n_anomalous = static_cast<int>(d.anomaly_count());
  rec.n_normal = static_cast<int>(d.n()) - rec.n_anomalous;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Manifold m;
    if (learner == Learner::lmgp) {
      auto o = opts.lmgp;
      o.seed = seed;
      o.threads = 1;
      m = fit(d, o).manifold;
    } else {
      m = secondary_manifold(train(d, opts.autoencoder.spec_for(d, seed)));
    }
    const auto rep = detect(m, d.truth, opts.detect);
    if (rep.metrics) {
      rec.f1 = rep.metrics->f1;
      rec.precision = rep.metrics->precision;
      rec.gmean = rep.metrics->gmean;
      detail::fill_separation(rec, rep, *d.truth);
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Runs every (rate, repetition, learner) cell, using up to `threads` workers.
inline SweepResult run(const ExperimentSpec& spec_in, int threads = 1) {
  ExperimentSpec spec = spec_in;
  validate(spec);
  std::optional<Dataset> base;
  if (spec.benchmark == Benchmark::csv_file) {
    base = load_csv(spec.csv_file);
    if (base->anomaly_count() > 0) {
      // Labeled file: the anomaly rate is whatever the file holds.
      spec.anomaly_rates = {static_cast<double>(base->anomaly_count()) / static_cast<double>(base->n())};
    }
    if (spec.anomaly_rates.empty()) throw InputError("unlabeled csv_file needs anomaly rates to inject");
  }

  const std::size_t n_rates = spec.anomaly_rates.size();
  const auto n_reps = static_cast<std::size_t>(spec.repetitions);
  const std::size_t n_learners = spec.learners.size();
  SweepResult result;
  result.records.resize(n_rates * n_reps * n_learners);

  auto run_one = [&](std::size_t cell) {
    const std::size_t ri = cell / n_reps;
    const int rep = static_cast<int>(cell % n_reps);
    std::optional<Dataset> d;
    std::string data_error;
    try {
      d = detail::make_cell_dataset(spec, base ? &*base : nullptr, ri, rep);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (std::size_t li = 0; li < n_learners; ++li) {
      const Learner learner = spec.learners[li];
      SweepRecord rec;
      if (d) {
        const auto seed = derive_seed(spec.seed, {ri, static_cast<std::uint64_t>(rep), 2 + static_cast<std::uint64_t>(learner)});
        rec = run_cell(*d, learner, spec.learner_opts, seed);
      } else {
        rec.learner = learner;
        rec.failed = true;
        rec.error = data_error;
      }
      rec.benchmark = to_string(spec.benchmark);
      rec.rate = spec.anomaly_rates[ri];
      rec.rate_index = static_cast<int>(ri);
      rec.repetition = rep;
      result.records[cell * n_learners + li] = std::move(rec);
    }
  };

  const std::size_t cells = n_rates * n_reps;
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells)));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_one(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_one(c);
      });
  }
  return result;
}

struct Stats {
  double median = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation; 0 for one value
};

/// Order-independent: values are sorted before any accumulation.
inline Stats describe(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

struct SummaryRow {
  std::string benchmark;
  double rate = 0.0;
  Learner learner = Learner::lmgp;
  int n_ok = 0;
  int n_failed = 0;
  Stats f1, precision, gmean;
  [[nodiscard]] bool absent() const { return n_ok == 0; }
};

/// Median, mean and standard deviation of each metric per (rate, learner).
inline std::vector<SummaryRow> aggregate(const SweepResult& r) {
  struct Acc {
    SummaryRow row;
    std::vector<double> f1, precision, gmean;
  };
  std::map<std::tuple<std::string, double, int>, Acc> cells;
  for (const auto& rec : r.records) {
    auto& acc = cells[{rec.benchmark, rec.rate, static_cast<int>(rec.learner)}];
    acc.row.benchmark = rec.benchmark;
    acc.row.rate = rec.rate;
    acc.row.learner = rec.learner;
    if (rec.failed) {
      ++acc.row.n_failed;
      continue;
    }
    ++acc.row.n_ok;
    acc.f1.push_back(rec.f1);
    acc.precision.push_back(rec.precision);
    acc.gmean.push_back(rec.gmean);
  }
  std::vector<SummaryRow> out;
  for (auto& [key, acc] : cells) {
    acc.row.f1 = describe(acc.f1);
    acc.row.precision = describe(acc.precision);
    acc.row.gmean = describe(acc.gmean);
    out.push_back(acc.row);
  }
  return out;
}

inline std::string sweep_to_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "benchmark,rate,learner,repetition,f1,precision,gmean,seconds,failed\n";
  for (const auto& rec : r.records) {
    out << rec.benchmark << ',' << format_real(rec.rate) << ',' << to_string(rec.learner) << ',' << rec.repetition << ','
        << format_real(rec.f1) << ',' << format_real(rec.precision) << ',' << format_real(rec.gmean) << ','
        << format_real(rec.seconds) << ',' << (rec.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

/// Summary table; absent cells (all repetitions failed) have empty statistics.
inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "benchmark,rate,learner,n_ok,n_failed";
  for (const char* m : {"f1", "precision", "gmean"}) out << ',' << m << "_median," << m << "_mean," << m << "_sd";
  out << '\n';
  for (const auto& row : rows) {
    out << row.benchmark << ',' << format_real(row.rate) << ',' << to_string(row.learner) << ',' << row.n_ok << ','
        << row.n_failed;
    for (const Stats* s : {&row.f1, &row.precision, &row.gmean}) {
      if (row.absent()) out << ",,,";
      else out << ',' << format_real(s->median) << ',' << format_real(s->mean) << ',' << format_real(s->sd);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_BENCH_HPP
