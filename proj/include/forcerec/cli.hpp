#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "forcerec/dynamics.hpp"
#include "forcerec/errors.hpp"
#include "forcerec/frames.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/io.hpp"
#include "forcerec/measurement.hpp"
#include "forcerec/recovery.hpp"
#include "forcerec/scenarios.hpp"

// Config-driven command line front end. One experiment per invocation:
//
//   forcerec simulate --config exp.json        states + samples to CSV
//   forcerec analyze  --config exp.json        frame bounds and verdicts
//   forcerec recover  --config exp.json        run a recovery method
//   forcerec scenario --config exp.json        verify built-in constructions
//   forcerec norms    --config exp.json        data-matrix norms/membership
//
// A config describes its system either explicitly ("system" + "sampling")
// or through a named construction ("scenario": "adversarial" | "unstable" |
// "random" with "scenario_params"); simulate/analyze/recover/norms accept
// both forms.
//
// Exit codes: 0 success, 2 config error, 3 recoverability-condition
// failure, 4 numerical failure. `--set a.b.c=value` overrides config keys,
// `--json` switches stdout to machine-readable reports, and the FR_SEED
// environment variable overrides the config seed.

namespace forcerec {
namespace cli {

using nlohmann::json;

inline Complex parse_complex(const json& v) {
  if (v.is_number()) return Complex(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return Complex(v[0].get<double>(), v[1].get<double>());
  throw ConfigError("complex entries must be a number or [re, im]");
}

inline HVector parse_vector(const json& v, Eigen::Index expect = -1) {
  if (!v.is_array() || v.empty())
    throw ConfigError("vector entries must be a non-empty array");
  HVector out(static_cast<Eigen::Index>(v.size()));
  for (Eigen::Index k = 0; k < out.size(); ++k)
    out(k) = parse_complex(v[static_cast<std::size_t>(k)]);
  if (expect >= 0 && out.size() != expect)
    throw ConfigError("vector has length " + std::to_string(out.size()) +
                      ", expected " + std::to_string(expect));
  return out;
}

inline std::uint64_t seed_of(const json& cfg) {
  std::uint64_t seed = cfg.value("seed", 0ull);
  if (const char* env = std::getenv("FR_SEED")) {
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("FR_SEED must be an unsigned integer");
    }
  }
  return seed;
}

inline HOperator build_operator(const json& spec, Eigen::Index dim,
                                std::uint64_t seed) {
  if (!spec.is_object() || !spec.contains("kind"))
    throw ConfigError("system.A must be an object with a \"kind\"");
  const std::string kind = spec["kind"].get<std::string>();
  if (kind == "diagonal") {
    if (!spec.contains("values")) throw ConfigError("diagonal A needs \"values\"");
    const HVector diag = parse_vector(spec["values"], dim);
    HOperator a = HOperator::Zero(dim, dim);
    a.diagonal() = diag;
    return a;
  }
  if (kind == "dense") {
    if (!spec.contains("entries") || !spec["entries"].is_array())
      throw ConfigError("dense A needs \"entries\" (array of rows)");
    const auto& rows = spec["entries"];
    if (static_cast<Eigen::Index>(rows.size()) != dim)
      throw ConfigError("dense A must have dim rows");
    HOperator a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      a.row(i) = parse_vector(rows[static_cast<std::size_t>(i)], dim).transpose();
    return a;
  }
  if (kind == "random_contraction") {
    const double rho = spec.value("rho", 0.5);
    Rng rng(seed);
    return random_contraction(rng, dim, rho);
  }
  throw ConfigError("unknown A kind: " + kind);
}

inline Subspace build_subspace(const json& system, Eigen::Index dim) {
  if (!system.contains("W")) return Subspace::full(dim);
  const json& w = system["W"];
  if (!w.is_object() || !w.contains("basis") || !w["basis"].is_array() ||
      w["basis"].empty())
    throw ConfigError("system.W must be {\"basis\": [[...], ...]}");
  std::vector<HVector> basis;
  for (const auto& row : w["basis"]) basis.push_back(parse_vector(row, dim));
  return Subspace::span(basis);
}

struct BuiltSystem {
  HOperator a;
  Subspace source_space;
  HVector w;
  HVector x0;
  Eigen::Index dim;
  bool has_source = false;
};

inline BuiltSystem build_system(const json& cfg, std::uint64_t top_seed) {
  if (!cfg.contains("system") || !cfg["system"].is_object())
    throw ConfigError("config needs a \"system\" object");
  const json& sys = cfg["system"];
  if (!sys.contains("dim") || !sys["dim"].is_number_integer())
    throw ConfigError("system.dim must be an integer");
  const Eigen::Index dim = sys["dim"].get<Eigen::Index>();
  if (dim < 1) throw ConfigError("system.dim must be positive");
  const std::uint64_t seed = sys.value("seed", top_seed);
  if (!sys.contains("A")) throw ConfigError("system.A is required");

  BuiltSystem built{build_operator(sys["A"], dim, seed),
                    build_subspace(sys, dim),
                    HVector(HVector::Zero(dim)),
                    HVector(HVector::Zero(dim)),
                    dim};
  if (sys.contains("w")) {
    built.w = parse_vector(sys["w"], dim);
    built.has_source = true;
  }
  if (sys.contains("x0")) built.x0 = parse_vector(sys["x0"], dim);
  return built;
}

inline VectorSystem build_sampling(const json& cfg, Eigen::Index dim,
                                   std::uint64_t top_seed) {
  if (!cfg.contains("sampling"))
    throw ConfigError("config needs a \"sampling\" spec");
  const json& s = cfg["sampling"];
  if (s.is_array()) {
    std::vector<HVector> vecs;
    for (const auto& v : s) vecs.push_back(parse_vector(v, dim));
    return VectorSystem::from_vectors(vecs);
  }
  if (!s.is_object()) throw ConfigError("sampling must be an object or array");
  if (s.contains("vectors")) {
    std::vector<HVector> vecs;
    for (const auto& v : s["vectors"]) vecs.push_back(parse_vector(v, dim));
    return VectorSystem::from_vectors(vecs);
  }
  const std::string kind = s.value("kind", "");
  if (kind == "orthonormal") return VectorSystem::orthonormal_basis(dim);
  if (kind == "random") {
    const Eigen::Index count = s.value("count", dim);
    if (count < 1) throw ConfigError("sampling.count must be positive");
    Rng rng(top_seed ^ 0x9e3779b97f4a7c15ull);
    return VectorSystem(rng.matrix(dim, count));
  }
  if (kind == "weighted_basis") {
    if (!s.contains("weights")) throw ConfigError("weighted_basis needs \"weights\"");
    const HVector weights = parse_vector(s["weights"], dim);
    Eigen::MatrixXcd synth = Eigen::MatrixXcd::Zero(dim, dim);
    synth.diagonal() = weights;
    return VectorSystem(std::move(synth));
  }
  throw ConfigError("unknown sampling kind: " + kind);
}

// A fully built experiment: the system, optionally its sampling system, and
// a scenario-suggested horizon when the config does not fix one.
struct ExperimentSetup {
  BuiltSystem system;
  std::optional<VectorSystem> sampling;
  long fallback_horizon = 0;
};

inline AdversarialInstance adversarial_from(const json& params) {
  if (!params.contains("N"))
    throw ConfigError("adversarial scenario needs scenario_params.N");
  const long n = params["N"].get<long>();
  std::vector<double> lambdas;
  if (params.contains("lambdas"))
    for (const auto& l : params["lambdas"]) lambdas.push_back(l.get<double>());
  const Complex c =
      params.contains("c") ? parse_complex(params["c"]) : Complex(1, 0);
  const Eigen::Index dim = params.value("dim", n + 3);
  return build_adversarial(n, lambdas, c, dim);
}

inline ExperimentSetup build_setup(const json& cfg, std::uint64_t seed) {
  if (!cfg.contains("scenario")) {
    BuiltSystem built = build_system(cfg, seed);
    std::optional<VectorSystem> sampling;
    if (cfg.contains("sampling"))
      sampling = build_sampling(cfg, built.dim, seed);
    return {std::move(built), std::move(sampling), 0};
  }

  const std::string kind = cfg["scenario"].get<std::string>();
  const json params = cfg.value("scenario_params", json::object());
  if (kind == "adversarial") {
    const AdversarialInstance inst = adversarial_from(params);
    BuiltSystem built{inst.a,     inst.source_space, HVector(inst.c * inst.w),
                      inst.x0,    inst.dim,          true};
    return {std::move(built), inst.sampling(),
            default_impossibility_horizon(inst, params.value("eps", 1e-10))};
  }
  if (kind == "unstable") {
    const Eigen::Index dim = params.value("dim", 32);
    const UnstableInstance inst = build_unstable(dim);
    Rng rng(seed);
    BuiltSystem built{inst.a,       Subspace::full(dim), rng.vector(dim),
                      rng.vector(dim), dim,              true};
    return {std::move(built), inst.sampling, 2};
  }
  if (kind == "random") {
    const Eigen::Index dim = params.value("dim", 32);
    const Eigen::Index count = params.value("J", 6);
    const double rho = params.value("rho", 0.5);
    const Eigen::Index subspace_dim = params.value("subspace_dim", 4);
    RandomInstance inst = random_instance(seed, dim, count, rho, subspace_dim);
    BuiltSystem built{std::move(inst.system.a), std::move(inst.system.source_space),
                      std::move(inst.system.w), std::move(inst.system.x0),
                      dim,                      true};
    return {std::move(built), std::move(inst.sampling), 60};
  }
  throw ConfigError("unknown scenario: " + kind);
}

inline double positive_tolerance(const json& cfg, const char* key, double dflt) {
  double v = dflt;
  if (cfg.contains("tolerances") && cfg["tolerances"].contains(key))
    v = cfg["tolerances"][key].get<double>();
  if (!(v > 0.0)) throw ConfigError(std::string("tolerances.") + key + " must be positive");
  return v;
}

inline long horizon_of(const json& cfg, long fallback = 0) {
  if (cfg.contains("horizon")) {
    if (!cfg["horizon"].is_number_integer())
      throw ConfigError("horizon must be an integer");
    const long n = cfg["horizon"].get<long>();
    if (n < 1) throw ConfigError("horizon must be >= 1");
    return n;
  }
  if (fallback > 0) return fallback;
  throw ConfigError("config needs an integer \"horizon\"");
}

// Dotted-path override a.b.c=value; the value is parsed as JSON when it is
// valid JSON, kept as a string otherwise.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("empty key segment in --set path");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline json load_config(const std::string& path,
                        const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be an object");
  for (const auto& s : overrides) apply_override(cfg, s);
  return cfg;
}

inline void emit(const json& report, bool json_mode, std::ostream& out) {
  if (json_mode) {
    out << report.dump() << "\n";
    return;
  }
  for (const auto& [key, value] : report.items())
    out << key << ": " << value.dump() << "\n";
}

inline void write_report_file(const json& cfg, const json& report) {
  if (cfg.contains("output") && cfg["output"].contains("report_json")) {
    const std::string path = cfg["output"]["report_json"].get<std::string>();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << report.dump(2) << "\n";
  }
}

// Simulated states: continuous on "t_grid" when present, discrete otherwise.
inline std::vector<HVector> simulate_states(const json& cfg,
                                            const ExperimentSetup& setup) {
  const BuiltSystem& built = setup.system;
  if (cfg.contains("t_grid")) {
    std::vector<double> grid;
    for (const auto& t : cfg["t_grid"]) grid.push_back(t.get<double>());
    ContinuousSystem sys(built.a, built.w, built.x0, grid);
    return evolve_continuous(sys);
  }
  DiscreteSystem sys(built.a, built.source_space, built.w, built.x0);
  return iterate(sys, horizon_of(cfg, setup.fallback_horizon));
}

inline int cmd_simulate(const json& cfg, bool json_mode, std::ostream& out) {
  const std::uint64_t seed = seed_of(cfg);
  const ExperimentSetup setup = build_setup(cfg, seed);
  const auto states = simulate_states(cfg, setup);

  json report;
  report["states"] = static_cast<long>(states.size());
  report["dim"] = setup.system.dim;
  report["final_state_norm"] = states.back().norm();
  if (cfg.contains("output") && cfg["output"].contains("trajectory_csv")) {
    const std::string path = cfg["output"]["trajectory_csv"].get<std::string>();
    io::write_trajectory_csv(states, path);
    report["trajectory_csv"] = path;
  }
  if (setup.sampling) {
    const DataMatrix d = sample(states, *setup.sampling);
    report["norm_sup"] = norm_sup(d);
    if (cfg.contains("output") && cfg["output"].contains("data_csv")) {
      const std::string path = cfg["output"]["data_csv"].get<std::string>();
      io::write_data_matrix_csv(d, path);
      report["data_csv"] = path;
    }
  }
  write_report_file(cfg, report);
  emit(report, json_mode, out);
  return 0;
}

constexpr const char* kVerdictFinite = "recoverable-finite (Thm 3.2)";
constexpr const char* kVerdictInfinite = "recoverable-infinite (Thm 3.5)";
constexpr const char* kVerdictFails = "necessary condition fails (Thm 3.3)";

inline json analyze_report(const BuiltSystem& built, const VectorSystem& g) {
  json report;
  report["bessel_bound"] = bessel_bound(g);
  const Subspace full = Subspace::full(built.dim);
  const FrameBounds on_h = frame_bounds_on(g, full);
  report["frame_bounds_H"] = {{"lower", on_h.lower}, {"upper", on_h.upper}};
  const FrameBounds on_w = frame_bounds_on(g, built.source_space);
  report["frame_bounds_W"] = {{"lower", on_w.lower}, {"upper", on_w.upper}};
  const double rho = spectral_radius(built.a);
  report["spectral_radius"] = rho;

  bool infinite_ok = false;
  try {
    const FrameBounds rb =
        frame_bounds_on(recoverability_system(built.a, g, built.source_space),
                        built.source_space);
    report["recoverability_bounds_W"] = {{"lower", rb.lower}, {"upper", rb.upper}};
    infinite_ok = is_frame(rb) && rho < 1.0;
  } catch (const NumericalError& e) {
    report["recoverability_bounds_W"] = {{"error", e.what()}};
  }
  report["verdicts"] = {
      {"finite", is_frame(on_h) ? kVerdictFinite : kVerdictFails},
      {"infinite", infinite_ok ? kVerdictInfinite : kVerdictFails}};
  return report;
}

inline int cmd_analyze(const json& cfg, bool json_mode, std::ostream& out) {
  const std::uint64_t seed = seed_of(cfg);
  const ExperimentSetup setup = build_setup(cfg, seed);
  if (!setup.sampling)
    throw ConfigError("analyze needs a \"sampling\" spec or a scenario");
  const json report = analyze_report(setup.system, *setup.sampling);
  write_report_file(cfg, report);
  emit(report, json_mode, out);
  return 0;
}

inline RecoveryMethod parse_method(const std::string& name) {
  if (name == "two_sample") return RecoveryMethod::two_sample;
  if (name == "infinite_horizon") return RecoveryMethod::infinite_horizon;
  if (name == "time_varying") return RecoveryMethod::time_varying;
  if (name == "continuous") return RecoveryMethod::continuous;
  throw ConfigError("unknown recovery method: " + name);
}

inline int cmd_recover(const json& cfg, bool json_mode, bool force,
                       std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = seed_of(cfg);
  const ExperimentSetup setup = build_setup(cfg, seed);
  const BuiltSystem& built = setup.system;
  if (!setup.sampling)
    throw ConfigError("recover needs a \"sampling\" spec or a scenario");
  const VectorSystem& g = *setup.sampling;
  if (!cfg.contains("recovery") || !cfg["recovery"].is_object())
    throw ConfigError("config needs a \"recovery\" object");
  const json& rc = cfg["recovery"];
  const RecoveryMethod method = parse_method(rc.value("method", ""));
  const double eps = positive_tolerance(cfg, "eps", rc.value("eps", 1e-10));

  // Gate on the matching recoverability verdict unless forced.
  const json verdicts = analyze_report(built, g)["verdicts"];
  const bool finite_ok = verdicts["finite"].get<std::string>() == kVerdictFinite;
  const bool infinite_ok =
      verdicts["infinite"].get<std::string>() == kVerdictInfinite;
  const bool needed = method == RecoveryMethod::infinite_horizon ? infinite_ok
                                                                 : finite_ok;
  if (!needed && !force) {
    const char* condition = method == RecoveryMethod::infinite_horizon
                                ? "recoverability condition fails (Thm 3.4)"
                                : "full-space frame required (Thm 3.2)";
    err << json{{"error", condition}, {"code", 3}}.dump() << "\n";
    return 3;
  }

  // Data: an existing CSV, or an inline simulation of the configured system.
  const bool inline_data = !cfg.contains("data_csv_in");
  DataMatrix data(1);
  if (!inline_data) {
    const std::string path = cfg["data_csv_in"].get<std::string>();
    if (!std::filesystem::exists(path))
      throw ConfigError("data_csv_in does not exist: " + path);
    data = io::read_data_matrix_csv(path);
  } else if (method != RecoveryMethod::continuous) {
    if (method == RecoveryMethod::infinite_horizon && !cfg.contains("horizon") &&
        !cfg.contains("t_grid") && setup.fallback_horizon == 0) {
      // no horizon anywhere: stream rows until the tail test passes
      DiscreteSystem sys(built.a, built.source_space, built.w, built.x0);
      data = sample_until_strong(sys, g, eps, rc.value("n_max", 10000l));
    } else {
      data = sample(simulate_states(cfg, setup), g);
    }
  }

  const double rank_tol = force ? 1e-14 : 1e-10;
  json report;
  auto attach_truth = [&](RecoveryReport& rep) {
    if (inline_data && built.has_source)
      rep.residual = (rep.w_hat - built.w).norm();
  };

  switch (method) {
    case RecoveryMethod::two_sample: {
      const VectorSystem dual = canonical_dual(g, rank_tol);
      RecoveryReport rep =
          rc.value("average_pairs", false)
              ? recover_pair_averaged(data, built.a, g, dual, rank_tol)
              : recover_two_sample(data.row(0), data.row(1), built.a, g, dual,
                                   rank_tol);
      attach_truth(rep);
      report = io::recovery_report_json(rep);
      break;
    }
    case RecoveryMethod::infinite_horizon: {
      RecoveryReport rep =
          recover_infinite(data, built.a, g, built.source_space, eps, rank_tol);
      attach_truth(rep);
      report = io::recovery_report_json(rep);
      report["converged"] = true;
      break;
    }
    case RecoveryMethod::time_varying: {
      const VectorSystem dual = canonical_dual(g, rank_tol);
      auto reps = recover_time_varying(data, built.a, g, dual, rank_tol);
      for (auto& rep : reps) attach_truth(rep);
      report["method"] = "time_varying";
      report["reports"] = json::array();
      for (const auto& rep : reps)
        report["reports"].push_back(io::recovery_report_json(rep));
      break;
    }
    case RecoveryMethod::continuous: {
      const double h = rc.value("h", 0.05);
      if (!(h > 0.0)) throw ConfigError("recovery.h must be positive");
      const std::string diff = rc.value("difference", "central");
      DifferenceScheme scheme = DifferenceScheme::automatic;
      if (diff == "forward") scheme = DifferenceScheme::forward;
      else if (diff == "central") scheme = DifferenceScheme::central;
      else if (diff != "auto") throw ConfigError("recovery.difference must be forward, central or auto");
      SampledCurve curve;
      for (double t : {-2.0 * h, -h, 0.0, h, 2.0 * h}) {
        curve.ts.push_back(t);
        curve.rows.push_back(
            g.analyze(continuous_state(built.a, built.x0, built.w, t)));
      }
      const VectorSystem dual = canonical_dual(g, rank_tol);
      RecoveryReport rep =
          recover_continuous(curve, built.a, g, dual, h, scheme, rank_tol);
      attach_truth(rep);
      report = io::recovery_report_json(rep);
      break;
    }
  }
  write_report_file(cfg, report);
  emit(report, json_mode, out);
  return 0;
}

inline int cmd_scenario(const json& cfg, bool json_mode, std::ostream& out) {
  const std::uint64_t seed = seed_of(cfg);
  if (!cfg.contains("scenario"))
    throw ConfigError("config needs a \"scenario\" name");
  const std::string kind = cfg["scenario"].get<std::string>();
  const json params = cfg.value("scenario_params", json::object());

  json report;
  report["scenario"] = kind;
  if (kind == "adversarial") {
    const AdversarialInstance inst = adversarial_from(params);
    const long horizon = params.value("horizon", 0l);
    const double eps = params.value("eps", 1e-10);
    const ImpossibilityReport rep = verify_impossibility(inst, horizon, eps);
    report["N"] = inst.n_blind;
    report["dim"] = inst.dim;
    report["blind_row_max"] = rep.blind_row_max;
    report["blind_row_bound"] = rep.blind_row_bound;
    report["zero_source_row_max"] = rep.zero_source_row_max;
    report["first_visible_sample"] = rep.first_visible_sample;
    report["recovery_residual"] = rep.recovery_residual;
    report["recovery_horizon"] = rep.horizon_used;
    report["blind_rows_vanish"] = rep.blind_rows_vanish;
    report["indistinguishable_from_zero"] = rep.indistinguishable_from_zero;
    report["recovered_beyond_horizon"] = rep.recovered_beyond_horizon;
    report["all_pass"] = rep.all_pass;
  } else if (kind == "unstable") {
    const Eigen::Index dim = params.value("dim", 32);
    const UnstableInstance inst = build_unstable(dim);
    Rng rng(seed);
    const HVector w = rng.vector(dim);
    const HVector x0 = rng.vector(dim);
    DiscreteSystem sys(inst.a, Subspace::full(dim), w, x0);
    const DataMatrix d = sample(iterate(sys, 2), inst.sampling);
    const double exactness = (inst.recovery(d) - w).norm() / w.norm();
    report["dim"] = dim;
    report["bessel_bound"] = bessel_bound(inst.sampling);
    report["frame_lower_bound_H"] =
        frame_bounds_on(inst.sampling, Subspace::full(dim)).lower;
    report["exact_recovery_residual"] = exactness;
    report["stability_estimate"] =
        estimate_stability(inst.recovery, 2, dim, 8, seed + 1);
  } else if (kind == "random") {
    const Eigen::Index dim = params.value("dim", 32);
    const Eigen::Index count = params.value("J", 6);
    const double rho = params.value("rho", 0.5);
    const Eigen::Index subspace_dim = params.value("subspace_dim", 4);
    const RandomInstance inst = random_instance(seed, dim, count, rho, subspace_dim);
    report["dim"] = dim;
    report["J"] = count;
    report["spectral_radius"] = spectral_radius(inst.system.a);
    report["frame_condition"] = inst.frame_condition;
    report["recoverability_bounds_W"] = {
        {"lower", inst.recoverability_bounds.lower},
        {"upper", inst.recoverability_bounds.upper}};
    if (params.contains("horizon")) {
      const long horizon = params["horizon"].get<long>();
      const DataMatrix d = sample(iterate(inst.system, horizon), inst.sampling);
      const RecoveryReport rep = recover_infinite(
          d, inst.system.a, inst.sampling, inst.system.source_space, 1e-10);
      report["recovery_residual"] = (rep.w_hat - inst.system.w).norm();
    }
  } else {
    throw ConfigError("unknown scenario: " + kind);
  }
  write_report_file(cfg, report);
  emit(report, json_mode, out);
  return 0;
}

inline int cmd_norms(const json& cfg, bool json_mode, std::ostream& out) {
  const double eps = positive_tolerance(cfg, "eps", 1e-10);
  DataMatrix data(1);
  if (cfg.contains("data_csv_in")) {
    const std::string path = cfg["data_csv_in"].get<std::string>();
    if (!std::filesystem::exists(path))
      throw ConfigError("data_csv_in does not exist: " + path);
    data = io::read_data_matrix_csv(path);
  } else {
    const std::uint64_t seed = seed_of(cfg);
    const ExperimentSetup setup = build_setup(cfg, seed);
    if (!setup.sampling)
      throw ConfigError("norms needs data_csv_in, a sampling spec, or a scenario");
    data = sample(simulate_states(cfg, setup), *setup.sampling);
  }
  const StrongResult strong = is_strong(data, eps);
  const json report = io::membership_report(data, strong, eps);
  write_report_file(cfg, report);
  emit(report, json_mode, out);
  return 0;
}

inline int dispatch(const std::string& command, const json& cfg, bool json_mode,
                    bool force, std::ostream& out, std::ostream& err) {
  if (command == "simulate") return cmd_simulate(cfg, json_mode, out);
  if (command == "analyze") return cmd_analyze(cfg, json_mode, out);
  if (command == "recover") return cmd_recover(cfg, json_mode, force, out, err);
  if (command == "scenario") return cmd_scenario(cfg, json_mode, out);
  if (command == "norms") return cmd_norms(cfg, json_mode, out);
  throw ConfigError("unknown command: " + command);
}

inline int run_one(const std::string& command, const json& cfg, bool json_mode,
                   bool force, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(command, cfg, json_mode, force, out, err);
  } catch (const FrameConditionError& e) {
    err << json{{"error", e.what()}, {"code", 3}}.dump() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << json{{"error", e.what()}, {"code", 4}}.dump() << "\n";
    return 4;
  } catch (const DataError& e) {
    err << json{{"error", e.what()}, {"code", 4}}.dump() << "\n";
    return 4;
  } catch (const Error& e) {  // config, dimension, argument errors
    err << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
    return 2;
  }
}

// `--sweep`: the config carries a top-level "sweep" array of full config
// objects; each runs isolated on a worker thread and the collected outputs
// are printed in config order. The exit code is the worst one observed.
inline int run_sweep(const std::string& command, const json& cfg, bool json_mode,
                     bool force, std::ostream& out, std::ostream& err) {
  if (!cfg.contains("sweep") || !cfg["sweep"].is_array() || cfg["sweep"].empty())
    throw ConfigError("--sweep needs a non-empty top-level \"sweep\" array");
  const auto& entries = cfg["sweep"];
  std::vector<int> codes(entries.size(), 0);
  std::vector<std::string> outs(entries.size()), errs(entries.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    workers.emplace_back([&, i] {
      std::ostringstream o, e;
      codes[i] = run_one(command, entries[i], json_mode, force, o, e);
      outs[i] = o.str();
      errs[i] = e.str();
    });
  }
  for (auto& w : workers) w.join();
  int worst = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << outs[i];
    err << errs[i];
    worst = std::max(worst, codes[i]);
  }
  return worst;
}

inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"source-term recovery for linearly driven dynamical systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool json_mode = false;
  bool force = false;
  bool sweep = false;
  for (const char* name : {"simulate", "analyze", "recover", "scenario", "norms"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--set", overrides, "override config keys: a.b.c=value");
    sub->add_flag("--json", json_mode, "machine-readable stdout");
    sub->add_flag("--sweep", sweep, "run the config's \"sweep\" array in parallel");
    if (std::string(name) == "recover")
      sub->add_flag("--force", force, "run even when the recoverability verdict is negative");
  }

  std::vector<const char*> argv;
  argv.push_back("forcerec");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const json cfg = load_config(config_path, overrides);
    if (sweep) return run_sweep(command, cfg, json_mode, force, out, err);
    return run_one(command, cfg, json_mode, force, out, err);
  } catch (const Error& e) {
    err << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
    return 2;
  }
}

}  // namespace cli
}  // namespace forcerec
