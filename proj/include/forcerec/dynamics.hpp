#pragma once

#include <Eigen/Dense>
#include <functional>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "forcerec/errors.hpp"
#include "forcerec/frames.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/measurement.hpp"

// Linear dynamical systems driven by a constant source: the discrete
// recursion x_{n+1} = A x_n + w, its closed form, the stationary map
// w -> (I - A)^{-1} w, an abstract generalized system with caller-supplied
// step and stationary maps, and a continuous-time counterpart
// x'(t) = A x(t) + w for bounded A.

namespace forcerec {

struct DiscreteSystem {
  HOperator a;
  Subspace source_space;  // W
  HVector w;              // must lie in W
  HVector x0;

  DiscreteSystem(HOperator a_, Subspace w_space, HVector w_, HVector x0_)
      : a(std::move(a_)),
        source_space(std::move(w_space)),
        w(std::move(w_)),
        x0(std::move(x0_)) {
    const Eigen::Index d = a.rows();
    if (a.cols() != d || source_space.ambient_dim() != d || w.size() != d ||
        x0.size() != d)
      throw DimensionError("DiscreteSystem: inconsistent dimensions");
    if (!entries_finite(a) || !entries_finite(w) || !entries_finite(x0))
      throw InvalidArgument("DiscreteSystem: non-finite entries");
    if ((source_space.project(w) - w).norm() > 1e-10 * std::max(1.0, w.norm()))
      throw InvalidArgument("DiscreteSystem: source does not lie in the source subspace");
  }

  Eigen::Index dim() const { return a.rows(); }
};

// x_0, ..., x_{N-1} by direct recursion. Trajectories may legitimately blow
// up when the spectral radius exceeds 1; the guard converts overflow into a
// diagnosable error before Inf/NaN contaminate downstream sums.
inline std::vector<HVector> iterate(const DiscreteSystem& sys, long n_states) {
  if (n_states < 1) throw InvalidArgument("iterate: need at least one state");
  std::vector<HVector> states;
  states.reserve(static_cast<std::size_t>(n_states));
  states.push_back(sys.x0);
  for (long n = 1; n < n_states; ++n) {
    HVector next = sys.a * states.back() + sys.w;
    if (next.norm() > 1e150)
      throw NumericalError("divergent trajectory: state norm exceeded 1e150 at step " +
                           std::to_string(n));
    states.push_back(std::move(next));
  }
  return states;
}

// x_n = A^n x_0 + (I - A^n)(I - A)^{-1} w, requiring 1 outside the spectrum.
inline HVector closed_form(const DiscreteSystem& sys, long n) {
  if (n < 0) throw InvalidArgument("closed_form: negative step index");
  if (n == 0) return sys.x0;
  const Resolvent r = resolvent_at_one(sys.a);
  const HOperator an = operator_power(sys.a, n);
  const HOperator identity = HOperator::Identity(sys.dim(), sys.dim());
  return an * sys.x0 + (identity - an) * (r.op * sys.w);
}

struct StationaryMap {
  HOperator forward;   // S = (I - A)^{-1}, applied to sources in W
  HOperator adjoint;   // S* = P_W (I - A*)^{-1}
  double rho;          // spectral radius of A
  bool attracting;     // rho < 1: trajectories converge to S(w)
};

// The map sending a source to its stationary state. The map exists whenever
// 1 is outside the spectrum; attraction of arbitrary initial states to the
// stationary state additionally needs spectral radius < 1, reported via the
// `attracting` flag rather than an error.
inline StationaryMap stationary_map(const DiscreteSystem& sys) {
  const Resolvent r = resolvent_at_one(sys.a);
  StationaryMap s;
  s.forward = r.op;
  s.adjoint = sys.source_space.projector() * r.op.adjoint();
  s.rho = spectral_radius(sys.a);
  s.attracting = s.rho < 1.0;
  return s;
}

// Row n = (<x_n, g_j>)_j.
inline DataMatrix sample(const std::vector<HVector>& states,
                         const VectorSystem& g) {
  if (states.empty()) throw InvalidArgument("sample: no states");
  DataMatrix d(g.count());
  for (const HVector& x : states) d.append_row(g.analyze(x));
  return d;
}

// Streaming driver: generate and sample rows until the tail-Cauchy test
// passes (checked every 16 rows) or the horizon cap is reached. Realizes
// "run until the rows settle" without a caller-chosen horizon.
inline DataMatrix sample_until_strong(const DiscreteSystem& sys,
                                      const VectorSystem& g,
                                      double eps = 1e-10, long n_max = 10000) {
  if (n_max < 2) throw InvalidArgument("sample_until_strong: horizon cap < 2");
  DataMatrix d(g.count());
  HVector x = sys.x0;
  d.append_row(g.analyze(x));
  for (long n = 1; n < n_max; ++n) {
    x = sys.a * x + sys.w;
    if (x.norm() > 1e150)
      throw NumericalError("divergent trajectory: state norm exceeded 1e150 at step " +
                           std::to_string(n));
    d.append_row(g.analyze(x));
    if (n % 16 == 0 && is_strong(d, eps).is_strong) break;
  }
  return d;
}

// Generalized system: caller supplies the step map (next state from the
// full history and the source; must be linear in both) and the stationary
// map S. The library validates the stationarity/attraction/linearity
// contract empirically instead of assuming it.
struct GeneralSystem {
  std::function<HVector(const std::vector<HVector>& history, const HVector& w)> step;
  std::function<HVector(const HVector& w)> stationary;
  Subspace source_space;
};

inline std::vector<HVector> iterate_general(const GeneralSystem& sys,
                                            const HVector& x0, const HVector& w,
                                            long n_states) {
  if (n_states < 1) throw InvalidArgument("iterate_general: need at least one state");
  std::vector<HVector> states{x0};
  for (long n = 1; n < n_states; ++n) {
    HVector next = sys.step(states, w);
    if (next.norm() > 1e150)
      throw NumericalError("divergent trajectory: state norm exceeded 1e150 at step " +
                           std::to_string(n));
    states.push_back(std::move(next));
  }
  return states;
}

struct GeneralValidation {
  bool stationary_ok = false;   // orbit launched at S(w) stays at S(w)
  bool attraction_ok = false;   // random starts approach S(w) below tol
  bool linear_ok = false;       // step superposes on random probes
  double stationary_drift = 0.0;
  double final_gap = 0.0;
};

inline GeneralValidation validate_general(const GeneralSystem& sys,
                                          const HVector& w, long horizon,
                                          double tol, std::uint64_t seed = 7u) {
  GeneralValidation v;
  const HVector fixed = sys.stationary(w);
  const auto orbit = iterate_general(sys, fixed, w, horizon);
  for (const HVector& x : orbit)
    v.stationary_drift = std::max(v.stationary_drift, (x - fixed).norm());
  v.stationary_ok = v.stationary_drift <= tol * std::max(1.0, fixed.norm());

  Rng rng(seed);
  v.attraction_ok = true;
  for (int probe = 0; probe < 3; ++probe) {
    const auto path = iterate_general(sys, rng.vector(fixed.size()), w, horizon);
    const double gap = (path.back() - fixed).norm();
    v.final_gap = std::max(v.final_gap, gap);
    if (gap > tol * std::max(1.0, fixed.norm())) v.attraction_ok = false;
  }

  const Eigen::Index d = fixed.size();
  std::vector<HVector> h1{rng.vector(d), rng.vector(d)};
  std::vector<HVector> h2{rng.vector(d), rng.vector(d)};
  const HVector w1 = rng.vector(d), w2 = rng.vector(d);
  const Complex alpha = rng.gaussian_complex(), beta = rng.gaussian_complex();
  std::vector<HVector> mix{alpha * h1[0] + beta * h2[0],
                           alpha * h1[1] + beta * h2[1]};
  const HVector lhs = sys.step(mix, alpha * w1 + beta * w2);
  const HVector rhs = alpha * sys.step(h1, w1) + beta * sys.step(h2, w2);
  v.linear_ok = (lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm());
  return v;
}

struct ContinuousSystem {
  HOperator a;  // bounded generator
  HVector w;
  HVector x0;
  std::vector<double> t_grid;  // starts at 0, strictly increasing

  ContinuousSystem(HOperator a_, HVector w_, HVector x0_,
                   std::vector<double> grid)
      : a(std::move(a_)), w(std::move(w_)), x0(std::move(x0_)),
        t_grid(std::move(grid)) {
    const Eigen::Index d = a.rows();
    if (a.cols() != d || w.size() != d || x0.size() != d)
      throw DimensionError("ContinuousSystem: inconsistent dimensions");
    if (t_grid.empty() || t_grid.front() != 0.0)
      throw InvalidArgument("ContinuousSystem: t_grid must start at 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
      if (!(t_grid[i] > t_grid[i - 1]))
        throw InvalidArgument("ContinuousSystem: t_grid must be strictly increasing");
  }

  Eigen::Index dim() const { return a.rows(); }
};

// State of x' = Ax + w at an arbitrary time. The augmented block matrix
// [[A, w], [0, 0]] exponentiates to [[e^{tA}, int_0^t e^{sA} w ds], [0, 1]],
// which stays valid when 0 is in the spectrum of A and for negative t.
inline HVector continuous_state(const HOperator& a, const HVector& x0,
                                const HVector& w, double t) {
  const Eigen::Index d = a.rows();
  if (a.cols() != d || x0.size() != d || w.size() != d)
    throw DimensionError("continuous_state: inconsistent dimensions");
  HOperator aug = HOperator::Zero(d + 1, d + 1);
  aug.topLeftCorner(d, d) = a;
  aug.topRightCorner(d, 1) = w;
  const HOperator e = (t * aug).exp();
  if (!entries_finite(e))
    throw NumericalError("continuous_state: matrix exponential overflowed");
  return e.topLeftCorner(d, d) * x0 + e.topRightCorner(d, 1);
}

inline std::vector<HVector> evolve_continuous(const ContinuousSystem& sys) {
  std::vector<HVector> states;
  states.reserve(sys.t_grid.size());
  for (double t : sys.t_grid)
    states.push_back(continuous_state(sys.a, sys.x0, sys.w, t));
  return states;
}

}  // namespace forcerec
