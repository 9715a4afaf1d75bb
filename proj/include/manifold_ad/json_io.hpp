// JSON forms of reports and experiment specs (nlohmann/json).
//
// Experiment spec files use the field names of ExperimentSpec:
//
//   {
//     "benchmark": "wing_corrupt",
//     "anomaly_rates": [0.05, 0.1, 0.2, 0.3],
//     "n_total": 500, "repetitions": 20, "seed": 7,
//     "learners": ["lmgp", "autoencoder"],
//     "noise_sd": 5.0,
//     "csv_file": "data.csv",
//     "input_ranges": {"s_w": [150, 200]},
//     "a_low": 1.0, "a_high": 2.0,
//     "learner_opts": {
//       "lmgp": {"n_restarts": 4, "max_iter": 500, "tol": 1e-5, "estimate_delta": true, "delta_init": 0.01},
//       "autoencoder": {"hidden_widths": [32, 8], "activation": "tanh", "epochs": 2000,
//                       "batch_size": 64, "step_size": 0.001},
//       "detect": {"center": "auto", "space": "distance"}
//     }
//   }
//
// Every field is optional; missing fields keep their defaults.

#ifndef MANIFOLD_AD_JSON_IO_HPP
#define MANIFOLD_AD_JSON_IO_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "manifold_ad/bench.hpp"

namespace manifold_ad {

using nlohmann::json;

namespace detail {

/// NaN and infinities become null.
inline json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const FitReport& r) {
  return json{{"final_objective", detail::real(r.final_objective)},
              {"initial_objective", detail::real(r.initial_objective)},
              {"n_restarts", r.n_restarts},
              {"iterations", r.iterations},
              {"gradient_norm_at_solution", detail::real(r.gradient_norm_at_solution)},
              {"converged", r.converged},
              {"best_restart", r.best_restart},
              {"status", r.status},
              {"wall_clock_seconds", r.seconds}};
}

inline json to_json(const Metrics& m) {
  return json{{"f1", m.f1},
              {"precision", m.precision},
              {"gmean", m.gmean},
              {"f1_undefined", m.f1_undefined},
              {"precision_undefined", m.precision_undefined},
              {"gmean_undefined", m.gmean_undefined}};
}

inline json to_json(const Confusion& c) { return json{{"TP", c.tp}, {"FP", c.fp}, {"TN", c.tn}, {"FN", c.fn}}; }

inline json to_json(const DetectionReport& r) {
  json j;
  json pred = json::array();
  for (auto l : r.predicted) pred.push_back(static_cast<int>(l));
  json dist = json::array();
  for (Eigen::Index i = 0; i < r.distances.size(); ++i) dist.push_back(r.distances(i));
  j["predicted"] = pred;
  j["cluster_sizes"] = {r.cluster_sizes[0], r.cluster_sizes[1]};
  j["center_used"] = {r.center_used(0), r.center_used(1)};
  j["cluster_mean_distance"] = {r.centroids[0], r.centroids[1]};
  j["distances"] = dist;
  j["iterations"] = r.iterations;
  j["degenerate"] = r.degenerate;
  j["untrained"] = r.untrained;
  if (r.confusion) j["confusion"] = to_json(*r.confusion);
  if (r.metrics) j["metrics"] = to_json(*r.metrics);
  return j;
}

inline CenterMode parse_center(const std::string& s) {
  if (s == "auto" || s == "automatic") return CenterMode::automatic;
  if (s == "origin") return CenterMode::origin;
  if (s == "centroid") return CenterMode::centroid;
  throw InputError("unknown center mode '" + s + "'");
}

inline ClusterSpace parse_space(const std::string& s) {
  if (s == "distance" || s == "distance_1d" || s == "1d") return ClusterSpace::distance_1d;
  if (s == "coordinates" || s == "coordinates_2d" || s == "2d") return ClusterSpace::coordinates_2d;
  throw InputError("unknown clustering space '" + s + "'");
}

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw InputError("unknown activation '" + s + "'");
}

inline void apply_json(const json& j, LmgpFitOptions& o) {
  detail::read_field(j, "n_restarts", o.n_restarts);
  detail::read_field(j, "max_iter", o.max_iter);
  detail::read_field(j, "tol", o.tol);
  detail::read_field(j, "seed", o.seed);
  detail::read_field(j, "estimate_delta", o.estimate_delta);
  detail::read_field(j, "delta_init", o.delta_init);
}

inline void apply_json(const json& j, AeOptions& o) {
  detail::read_field(j, "hidden_widths", o.hidden_widths);
  if (j.contains("activation")) o.activation = parse_activation(j.at("activation").get<std::string>());
  detail::read_field(j, "epochs", o.epochs);
  detail::read_field(j, "batch_size", o.batch_size);
  detail::read_field(j, "step_size", o.step_size);
}

inline void apply_json(const json& j, DetectOptions& o) {
  if (j.contains("center")) o.center = parse_center(j.at("center").get<std::string>());
  if (j.contains("space")) o.space = parse_space(j.at("space").get<std::string>());
  detail::read_field(j, "max_iter", o.max_iter);
}

/// Overlays the fields present in `j` onto `spec`.
inline void apply_json(const json& j, ExperimentSpec& spec) {
  try {
    if (j.contains("benchmark")) spec.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
    detail::read_field(j, "anomaly_rates", spec.anomaly_rates);
    detail::read_field(j, "n_total", spec.n_total);
    detail::read_field(j, "repetitions", spec.repetitions);
    detail::read_field(j, "seed", spec.seed);
    detail::read_field(j, "csv_file", spec.csv_file);
    detail::read_field(j, "a_low", spec.a_low);
    detail::read_field(j, "a_high", spec.a_high);
    if (j.contains("noise_sd") && !j.at("noise_sd").is_null()) spec.noise_sd = j.at("noise_sd").get<double>();
    if (j.contains("learners")) {
      spec.learners.clear();
      for (const auto& l : j.at("learners")) spec.learners.push_back(parse_learner(l.get<std::string>()));
    }
    if (j.contains("input_ranges")) {
      for (const auto& [name, bounds] : j.at("input_ranges").items()) {
        if (!bounds.is_array() || bounds.size() != 2) throw InputError("input range for " + name + " must be [lo, hi]");
        spec.range_overrides.push_back({name, bounds[0].get<double>(), bounds[1].get<double>()});
      }
    }
    if (j.contains("learner_opts")) {
      const auto& lo = j.at("learner_opts");
      if (lo.contains("lmgp")) apply_json(lo.at("lmgp"), spec.learner_opts.lmgp);
      if (lo.contains("autoencoder")) apply_json(lo.at("autoencoder"), spec.learner_opts.autoencoder);
      if (lo.contains("detect")) apply_json(lo.at("detect"), spec.learner_opts.detect);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid experiment spec: ") + e.what());
  }
}

inline json to_json(const ExperimentSpec& s) {
  json j;
  j["benchmark"] = to_string(s.benchmark);
  j["anomaly_rates"] = s.anomaly_rates;
  j["n_total"] = s.n_total;
  j["repetitions"] = s.repetitions;
  j["seed"] = s.seed;
  json learners = json::array();
  for (auto l : s.learners) learners.push_back(to_string(l));
  j["learners"] = learners;
  j["noise_sd"] = s.noise_sd ? json(*s.noise_sd) : json(nullptr);
  if (!s.csv_file.empty()) j["csv_file"] = s.csv_file;
  j["a_low"] = s.a_low;
  j["a_high"] = s.a_high;
  json ranges = json::object();
  for (const auto& r : s.range_overrides) ranges[r.name] = {r.lo, r.hi};
  j["input_ranges"] = ranges;
  const auto& lo = s.learner_opts;
  j["learner_opts"]["lmgp"] = {{"n_restarts", lo.lmgp.n_restarts},
                               {"max_iter", lo.lmgp.max_iter},
                               {"tol", lo.lmgp.tol},
                               {"estimate_delta", lo.lmgp.estimate_delta},
                               {"delta_init", lo.lmgp.delta_init}};
  j["learner_opts"]["autoencoder"] = {{"hidden_widths", lo.autoencoder.hidden_widths},
                                      {"activation", lo.autoencoder.activation == Activation::tanh ? "tanh" : "relu"},
                                      {"epochs", lo.autoencoder.epochs},
                                      {"batch_size", lo.autoencoder.batch_size},
                                      {"step_size", lo.autoencoder.step_size}};
  const char* center = lo.detect.center == CenterMode::automatic ? "auto"
                       : lo.detect.center == CenterMode::origin  ? "origin"
                                                                 : "centroid";
  j["learner_opts"]["detect"] = {{"center", center},
                                 {"space", lo.detect.space == ClusterSpace::distance_1d ? "distance" : "coordinates"}};
  return j;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_JSON_IO_HPP
