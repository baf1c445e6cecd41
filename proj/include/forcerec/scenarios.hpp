#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "forcerec/dynamics.hpp"
#include "forcerec/errors.hpp"
#include "forcerec/frames.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/measurement.hpp"
#include "forcerec/random.hpp"
#include "forcerec/recovery.hpp"

// Executable counterexamples and instance generators.
//
// Adversarial instance: a diagonal contraction with dyadic source
// w_k = 2^{-k}, sampled through the single vector g = (I - A) w. For any
// horizon N one can place the initial state (supported on the first N
// coordinates) so that the first N sample rows vanish identically, making
// the source indistinguishable from zero on that horizon, while the
// unbounded-horizon route still recovers it.
//
// Unstable instance: A = I sampled through g_j = e_j / j. The explicit map
// D -> sum_j j (d_1j - d_0j) e_j inverts the sampling exactly on noiseless
// trajectories, but its norm grows linearly with the dimension.

namespace forcerec {

struct AdversarialInstance {
  long n_blind;                 // number of leading sample rows forced to zero
  Eigen::Index dim;
  std::vector<double> lambdas;  // all diagonal entries of A, in (0,1)
  HOperator a;
  HVector w;                    // dyadic source direction
  HVector g;                    // single sampling vector (I - A) w
  HVector x0;                   // nulling initial state, support on first n_blind coords
  Complex c;                    // source magnitude, the system is driven by c*w
  Subspace source_space;        // span{w}

  DiscreteSystem system() const {
    return DiscreteSystem(a, source_space, HVector(c * w), x0);
  }
  VectorSystem sampling() const {
    return VectorSystem::from_vectors({g});
  }
};

// Diagonal entries beyond the caller-specified head continue with
// 1/(k+2), nudged off any head value so the diagonal stays distinct.
inline std::vector<double> adversarial_spectrum(const std::vector<double>& head,
                                                Eigen::Index dim) {
  std::vector<double> full = head;
  for (Eigen::Index k = static_cast<Eigen::Index>(head.size()); k < dim; ++k) {
    double lam = 1.0 / static_cast<double>(k + 2);
    bool clash = true;
    while (clash) {
      clash = false;
      for (double h : full)
        if (std::abs(h - lam) < 1e-9) { clash = true; break; }
      if (clash) lam *= 0.993;
    }
    full.push_back(lam);
  }
  return full;
}

// Build the instance: solve the N x (N+1) homogeneous system whose first N
// columns carry lambda_k^n g_k and whose last column carries
// b_n = <w, (I + A + ... + A^{n-1}) g>, for the initial-state coefficients
// (a_1..a_N) given the source magnitude c. When `lambdas` is empty the
// defaults i/(N+1) are used.
inline AdversarialInstance build_adversarial(long n_blind,
                                             std::vector<double> lambdas,
                                             Complex c, Eigen::Index dim) {
  if (n_blind < 1) throw InvalidArgument("build_adversarial: N must be >= 1");
  if (c == Complex(0.0, 0.0))
    throw InvalidArgument("build_adversarial: c must be nonzero");
  if (dim < n_blind + 1)
    throw InvalidArgument("build_adversarial: dim must be at least N + 1");
  if (lambdas.empty())
    for (long i = 1; i <= n_blind; ++i)
      lambdas.push_back(static_cast<double>(i) / static_cast<double>(n_blind + 1));
  if (static_cast<long>(lambdas.size()) != n_blind)
    throw InvalidArgument("build_adversarial: need exactly N lambdas");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0 && lambdas[i] < 1.0))
      throw InvalidArgument("build_adversarial: lambdas must lie in (0,1)");
    for (std::size_t j = i + 1; j < lambdas.size(); ++j)
      if (lambdas[i] == lambdas[j])
        throw InvalidArgument("build_adversarial: lambdas must be distinct");
  }

  const std::vector<double> spectrum = adversarial_spectrum(lambdas, dim);
  HOperator a = HOperator::Zero(dim, dim);
  HVector w(dim), g(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double lam = spectrum[static_cast<std::size_t>(k)];
    const double wk = std::pow(2.0, -static_cast<double>(k + 1));
    a(k, k) = lam;
    w(k) = wk;
    g(k) = (1.0 - lam) * wk;
  }

  // b_n = <w, Lambda_n g>; Lambda_0 is the empty sum, so b_0 = 0.
  HVector b(n_blind);
  for (long n = 0; n < n_blind; ++n)
    b(n) = inner(w, HVector(geometric_sum(a, n) * g));

  Eigen::MatrixXcd v(n_blind, n_blind);
  for (long n = 0; n < n_blind; ++n)
    for (long k = 0; k < n_blind; ++k)
      v(n, k) = std::pow(spectrum[static_cast<std::size_t>(k)],
                         static_cast<double>(n)) *
                g(k);

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(v, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smin = svd.singularValues()(n_blind - 1);
  const double kappa = smin > 0.0 ? svd.singularValues()(0) / smin
                                  : std::numeric_limits<double>::infinity();
  if (!(smin > 0.0) || kappa > 1e12)
    throw NumericalError(
        "build_adversarial: nulling system nearly singular (condition " +
            std::to_string(kappa) + "); choose better-separated lambdas",
        kappa);
  const HVector coeffs = svd.solve(HVector(-c * b));

  HVector x0 = HVector::Zero(dim);
  x0.head(n_blind) = coeffs;
  return AdversarialInstance{n_blind,
                             dim,
                             spectrum,
                             std::move(a),
                             w,
                             std::move(g),
                             std::move(x0),
                             c,
                             Subspace::span(std::vector<HVector>{w})};
}

struct ImpossibilityReport {
  double blind_row_max = 0.0;       // max |<x_n, g>| over the blind horizon
  double blind_row_bound = 0.0;     // 1e-10 * ||g|| * max state norm, the pass level
  double zero_source_row_max = 0.0; // same samples for the zero system
  double first_visible_sample = 0.0;  // |<x_N, g>|
  double recovery_residual = 0.0;     // ||w_hat - c w|| / ||c w|| beyond the horizon
  long horizon_used = 0;
  bool blind_rows_vanish = false;
  bool indistinguishable_from_zero = false;
  bool recovered_beyond_horizon = false;
  bool all_pass = false;
};

// Horizon long enough that the trailing Cauchy window (the last quarter of
// the rows) already sits two decades below eps.
inline long default_impossibility_horizon(const AdversarialInstance& inst,
                                          double eps = 1e-10) {
  const double rho = *std::max_element(inst.lambdas.begin(), inst.lambdas.end());
  const DiscreteSystem sys = inst.system();
  const Resolvent r = resolvent_at_one(inst.a);
  const double scale =
      std::max(1.0, (sys.x0 - HVector(r.op * sys.w)).norm() * inst.g.norm());
  const double window_start =
      (std::log(eps * 1e-2) - std::log(scale)) / std::log(rho);
  const long n = static_cast<long>(std::ceil(window_start * 4.0 / 3.0));
  return std::max<long>(n + inst.n_blind, 50);
}

// Confirms the three facts the construction promises: the blind rows are
// numerically zero, the zero-source system produces the same (zero) rows,
// and sampling beyond the blind horizon still recovers the source.
inline ImpossibilityReport verify_impossibility(const AdversarialInstance& inst,
                                                long horizon = 0,
                                                double eps = 1e-10) {
  ImpossibilityReport rep;
  rep.horizon_used =
      horizon > 0 ? horizon : default_impossibility_horizon(inst, eps);
  if (rep.horizon_used <= inst.n_blind + 1)
    throw InvalidArgument("verify_impossibility: horizon must exceed the blind window");

  const DiscreteSystem sys = inst.system();
  const auto states = iterate(sys, rep.horizon_used);
  double max_state = 0.0;
  for (long n = 0; n < inst.n_blind; ++n) {
    rep.blind_row_max =
        std::max(rep.blind_row_max,
                 std::abs(inner(states[static_cast<std::size_t>(n)], inst.g)));
    max_state = std::max(max_state, states[static_cast<std::size_t>(n)].norm());
  }
  rep.blind_row_bound = 1e-10 * inst.g.norm() * std::max(1.0, max_state);
  rep.blind_rows_vanish = rep.blind_row_max <= rep.blind_row_bound;
  rep.first_visible_sample =
      std::abs(inner(states[static_cast<std::size_t>(inst.n_blind)], inst.g));

  const DiscreteSystem zero_sys(inst.a, inst.source_space,
                                HVector(HVector::Zero(inst.dim)),
                                HVector(HVector::Zero(inst.dim)));
  const auto zero_states = iterate(zero_sys, inst.n_blind);
  for (const HVector& x : zero_states)
    rep.zero_source_row_max =
        std::max(rep.zero_source_row_max, std::abs(inner(x, inst.g)));
  rep.indistinguishable_from_zero =
      rep.zero_source_row_max <= 1e-15 &&
      std::abs(rep.blind_row_max - rep.zero_source_row_max) <= rep.blind_row_bound;

  const DataMatrix data = sample(states, inst.sampling());
  const RecoveryReport rec =
      recover_infinite(data, inst.a, inst.sampling(), inst.source_space, eps);
  const HVector truth = inst.c * inst.w;
  rep.recovery_residual = (rec.w_hat - truth).norm() / truth.norm();
  rep.recovered_beyond_horizon = rep.recovery_residual < 1e-7;

  rep.all_pass = rep.blind_rows_vanish && rep.indistinguishable_from_zero &&
                 rep.recovered_beyond_horizon;
  return rep;
}

struct UnstableInstance {
  Eigen::Index dim;
  HOperator a;        // identity
  VectorSystem sampling;
  std::function<HVector(const DataMatrix&)> recovery;
};

// A = I with sampling vectors e_j / j and the explicit unbounded inverse.
inline UnstableInstance build_unstable(Eigen::Index dim) {
  if (dim < 2) throw InvalidArgument("build_unstable: dim must be >= 2");
  Eigen::MatrixXcd synth = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    synth(j, j) = 1.0 / static_cast<double>(j + 1);
  UnstableInstance inst{dim, HOperator::Identity(dim, dim),
                        VectorSystem(synth), {}};
  inst.recovery = [dim](const DataMatrix& d) {
    if (d.row_count() < 2)
      throw InvalidArgument("unstable recovery: need at least 2 rows");
    if (d.col_count() != dim)
      throw DimensionError("unstable recovery: column count mismatch");
    HVector w_hat(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      w_hat(j) = static_cast<double>(j + 1) * (d.row(1)(j) - d.row(0)(j));
    return w_hat;
  };
  return inst;
}

struct RandomInstance {
  DiscreteSystem system;
  VectorSystem sampling;
  FrameBounds recoverability_bounds;  // of {P_W (I-A*)^{-1} g_j} on W
  bool frame_condition;
};

// Random operator with spectral radius exactly rho: a random similarity of
// a diagonal whose leading eigenvalue is rho itself (real and simple), the
// rest drawn with moduli at most 0.6 rho. The similarity stays mildly
// non-normal (perturbation scaled by 1/sqrt(dim)) so trajectories decay
// with a clean dominant rate rho at every dimension.
inline HOperator random_contraction(Rng& rng, Eigen::Index dim, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidArgument("random_contraction: rho must lie in (0,1)");
  Eigen::VectorXcd eigs(dim);
  eigs(0) = rho;
  for (Eigen::Index k = 1; k < dim; ++k) {
    const double mag = rng.uniform(0.1, 0.6) * rho;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    eigs(k) = std::polar(mag, phase);
  }
  const Eigen::MatrixXcd p =
      Eigen::MatrixXcd::Identity(dim, dim) +
      (0.35 / std::sqrt(static_cast<double>(dim))) * rng.matrix(dim, dim);
  return p * eigs.asDiagonal() * p.inverse();
}

// Seeded instance: contraction dynamics at exactly rho_target, random
// orthonormal source subspace, random unit source in it, random sampling
// system.
inline RandomInstance random_instance(std::uint64_t seed, Eigen::Index dim,
                                      Eigen::Index n_vectors, double rho_target,
                                      Eigen::Index subspace_dim) {
  if (!(rho_target > 0.0 && rho_target < 1.0))
    throw InvalidArgument("random_instance: rho_target must lie in (0,1)");
  if (n_vectors < 1 || subspace_dim < 1 || subspace_dim > dim)
    throw InvalidArgument("random_instance: bad shape");
  Rng rng(seed);
  const HOperator a = random_contraction(rng, dim, rho_target);
  const Subspace w_space = Subspace::span(rng.matrix(dim, subspace_dim));
  HVector w = w_space.from_coords(rng.vector(w_space.dim()));
  w /= w.norm();
  const HVector x0 = rng.vector(dim);
  VectorSystem g(rng.matrix(dim, n_vectors));

  DiscreteSystem sys(a, w_space, w, x0);
  const FrameBounds rb = frame_bounds_on(recoverability_system(a, g, w_space), w_space);
  return RandomInstance{std::move(sys), std::move(g), rb, is_frame(rb)};
}

}  // namespace forcerec
