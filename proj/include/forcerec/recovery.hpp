#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "forcerec/errors.hpp"
#include "forcerec/frames.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/measurement.hpp"
#include "forcerec/random.hpp"

// Reconstruction of the source term from time-space samples.
//
// Finite-horizon route (full-space frame G with dual G~): the coefficients
// a_ij = <A* g_j, g~_i> turn two consecutive sample rows into the source's
// frame coefficients,
//
//     <w, g_j> = d_{n+1,j} - sum_i conj(a_ij) d_{n,i},
//
// so w = sum_j (...) g~_j, independent of the initial state. The same
// algebra recovers step-dependent sources and, with a derivative in place
// of the second row, the source of the continuous-time system.
//
// Unbounded-horizon route: when the derived system {P_W (I-A*)^{-1} g_j}
// frames the source subspace W, the partial syntheses of the rows through
// the dual of that system converge to w at the rate the states approach
// the stationary state.
//
// Every route is linear in the data; estimate_stability measures the norm
// of such a map against the Euclidean (entrywise L2) norm of the data.

namespace forcerec {

enum class RecoveryMethod { two_sample, infinite_horizon, time_varying, continuous };

inline const char* to_string(RecoveryMethod m) {
  switch (m) {
    case RecoveryMethod::two_sample: return "two_sample";
    case RecoveryMethod::infinite_horizon: return "infinite_horizon";
    case RecoveryMethod::time_varying: return "time_varying";
    case RecoveryMethod::continuous: return "continuous";
  }
  return "unknown";
}

struct RecoveryReport {
  HVector w_hat;
  double residual = 0.0;  // consistency residual; callers with ground truth
                          // overwrite it with the true error
  RecoveryMethod method = RecoveryMethod::two_sample;
  double stability_constant = 0.0;  // estimated norm of the recovery map
  std::vector<double> trace;        // per-step gaps for iterative methods
  HVector subspace_coords;          // coordinates of w_hat in a W basis, when known
};

namespace detail {

// Norm bound of the two-row reconstruction map, from the frame bounds of G
// and the operator norm of A: sqrt(2 max{1/c, (C/c^2)||A||^2}).
inline double two_row_stability(const HOperator& a, const FrameBounds& fb) {
  const double anorm = operator_norm(a);
  return std::sqrt(2.0 * std::max(1.0 / fb.lower,
                                  fb.upper / (fb.lower * fb.lower) * anorm * anorm));
}

inline FrameBounds require_full_space_frame(const VectorSystem& g,
                                            double rank_tol) {
  const FrameBounds fb = frame_bounds_on(g, Subspace::full(g.dim()));
  if (!is_frame(fb, rank_tol))
    throw FrameConditionError("full-space frame required (Thm 3.2)", fb.lower,
                              fb.upper);
  return fb;
}

// Distance of a coefficient vector from the range of the analysis map,
// relative to its size: zero exactly when the coefficients are realizable
// as samples of some vector.
inline double consistency_residual(const VectorSystem& g, const HVector& coeffs,
                                   const HVector& w_hat) {
  return (g.analyze(w_hat) - coeffs).norm() / std::max(1.0, coeffs.norm());
}

}  // namespace detail

// Source from the sample rows of two consecutive states. The result does
// not depend on which state the pair starts at, nor on the initial state.
inline RecoveryReport recover_two_sample(const HVector& row0,
                                         const HVector& row1,
                                         const HOperator& a,
                                         const VectorSystem& g,
                                         const VectorSystem& g_dual,
                                         double rank_tol = 1e-10) {
  if (row0.size() != g.count() || row1.size() != g.count())
    throw DimensionError("recover_two_sample: row length must match system size");
  const FrameBounds fb = detail::require_full_space_frame(g, rank_tol);
  const Eigen::MatrixXcd aij = coefficient_matrix(a, g, g_dual);
  const HVector coeffs = row1 - aij.adjoint() * row0;
  RecoveryReport rep;
  rep.method = RecoveryMethod::two_sample;
  rep.w_hat = g_dual.synthesize(coeffs);
  rep.residual = detail::consistency_residual(g, coeffs, rep.w_hat);
  rep.stability_constant = detail::two_row_stability(a, fb);
  return rep;
}

// The same map extended to arbitrary two-row matrices: the first row is
// synthesized back into a state estimate before the step is undone, so the
// map is defined (and bounded) on data that never came from a trajectory.
inline RecoveryReport recover_general_form(const DataMatrix& d,
                                           const HOperator& a,
                                           const VectorSystem& g,
                                           const VectorSystem& g_dual,
                                           double rank_tol = 1e-10) {
  if (d.row_count() < 2)
    throw InvalidArgument("recover_general_form: need at least 2 rows");
  if (d.col_count() != g.count())
    throw DimensionError("recover_general_form: column/system count mismatch");
  const FrameBounds fb = detail::require_full_space_frame(g, rank_tol);
  const HVector state0 = g_dual.synthesize(d.row(0));
  const HVector coeffs = d.row(1) - g.analyze(a * state0);
  RecoveryReport rep;
  rep.method = RecoveryMethod::two_sample;
  rep.w_hat = g_dual.synthesize(coeffs);
  rep.residual = detail::consistency_residual(g, coeffs, rep.w_hat);
  rep.stability_constant = detail::two_row_stability(a, fb);
  return rep;
}

// Limit of the partial syntheses of the rows through the canonical dual of
// the derived system {S* g_j} on W. The trace records the gap of every
// partial synthesis to the returned limit; under spectral radius < 1 it
// decays geometrically at that radius.
inline RecoveryReport recover_infinite(const DataMatrix& d,
                                       const VectorSystem& s_adj_dual,
                                       double eps) {
  RecoveryReport rep;
  rep.method = RecoveryMethod::infinite_horizon;
  rep.w_hat = limit_synthesis(d, s_adj_dual, eps);
  rep.trace.reserve(static_cast<std::size_t>(d.row_count()));
  for (Eigen::Index n = 0; n < d.row_count(); ++n)
    rep.trace.push_back((s_adj_dual.synthesize(d.row(n)) - rep.w_hat).norm());
  rep.residual = rep.trace.size() >= 2 ? rep.trace[rep.trace.size() - 2] : 0.0;
  rep.stability_constant = std::sqrt(bessel_bound(s_adj_dual));
  return rep;
}

// Convenience form that derives the dual system itself and reports the
// frame-condition failure in recovery terms.
inline RecoveryReport recover_infinite(const DataMatrix& d, const HOperator& a,
                                       const VectorSystem& g, const Subspace& w,
                                       double eps, double rank_tol = 1e-10) {
  VectorSystem derived = recoverability_system(a, g, w);
  try {
    RecoveryReport rep =
        recover_infinite(d, canonical_dual(derived, w, rank_tol), eps);
    rep.subspace_coords = w.coords(rep.w_hat);
    return rep;
  } catch (const FrameConditionError& e) {
    throw FrameConditionError(
        std::string("recoverability condition fails (Thm 3.4): ") + e.what(),
        e.lower(), e.upper());
  }
}

// Noise-reduction extension of the two-row formula for constant sources:
// the source coefficients c = row_{n+1} - a^H row_n are computed for every
// consecutive pair and averaged before synthesis. On noiseless data the
// result coincides with recover_two_sample; under independent row noise
// the averaging shrinks the error by roughly 1/sqrt(pairs).
inline RecoveryReport recover_pair_averaged(const DataMatrix& d,
                                            const HOperator& a,
                                            const VectorSystem& g,
                                            const VectorSystem& g_dual,
                                            double rank_tol = 1e-10) {
  if (d.row_count() < 2)
    throw InvalidArgument("recover_pair_averaged: need at least 2 rows");
  if (d.col_count() != g.count())
    throw DimensionError("recover_pair_averaged: column/system count mismatch");
  const FrameBounds fb = detail::require_full_space_frame(g, rank_tol);
  const Eigen::MatrixXcd aij = coefficient_matrix(a, g, g_dual);
  HVector coeffs = HVector::Zero(g.count());
  for (Eigen::Index n = 0; n + 1 < d.row_count(); ++n)
    coeffs += d.row(n + 1) - aij.adjoint() * d.row(n);
  coeffs /= static_cast<double>(d.row_count() - 1);
  RecoveryReport rep;
  rep.method = RecoveryMethod::two_sample;
  rep.w_hat = g_dual.synthesize(coeffs);
  rep.residual = detail::consistency_residual(g, coeffs, rep.w_hat);
  rep.stability_constant = detail::two_row_stability(a, fb);
  return rep;
}

// Per-step sources of x_{n+1} = A x_n + w_n, one report per step.
inline std::vector<RecoveryReport> recover_time_varying(
    const DataMatrix& d, const HOperator& a, const VectorSystem& g,
    const VectorSystem& g_dual, double rank_tol = 1e-10) {
  if (d.row_count() < 2)
    throw InvalidArgument("recover_time_varying: need at least 2 rows");
  if (d.col_count() != g.count())
    throw DimensionError("recover_time_varying: column/system count mismatch");
  const FrameBounds fb = detail::require_full_space_frame(g, rank_tol);
  const Eigen::MatrixXcd aij = coefficient_matrix(a, g, g_dual);
  const double stab = detail::two_row_stability(a, fb);
  std::vector<RecoveryReport> reports;
  reports.reserve(static_cast<std::size_t>(d.row_count() - 1));
  for (Eigen::Index n = 0; n + 1 < d.row_count(); ++n) {
    const HVector coeffs = d.row(n + 1) - aij.adjoint() * d.row(n);
    RecoveryReport rep;
    rep.method = RecoveryMethod::time_varying;
    rep.w_hat = g_dual.synthesize(coeffs);
    rep.residual = detail::consistency_residual(g, coeffs, rep.w_hat);
    rep.stability_constant = stab;
    reports.push_back(std::move(rep));
  }
  return reports;
}

// A curve of sample rows t -> (<x(t), g_j>)_j.
struct SampledCurve {
  std::vector<double> ts;
  std::vector<HVector> rows;

  Eigen::Index find(double t) const {
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (std::abs(ts[i] - t) <= 1e-12 * std::max(1.0, std::abs(t)))
        return static_cast<Eigen::Index>(i);
    return -1;
  }
};

enum class DifferenceScheme { automatic, forward, central };

// Source of the continuous-time system from the curve's value and slope at
// t = 0. The slope is a difference quotient: forward (f(h)-f(0))/h with
// O(h) error, or central (f(h)-f(-h))/(2h) with O(h^2) error when the
// curve carries a sample at -h. If the curve also carries the doubled
// stencil (2h, and -2h for central), the report's residual holds a
// step-halving estimate of the difference-quotient error.
inline RecoveryReport recover_continuous(const SampledCurve& curve,
                                         const HOperator& a,
                                         const VectorSystem& g,
                                         const VectorSystem& g_dual, double h,
                                         DifferenceScheme scheme =
                                             DifferenceScheme::automatic,
                                         double rank_tol = 1e-10) {
  if (h <= 0.0) throw InvalidArgument("recover_continuous: h must be positive");
  if (curve.ts.size() != curve.rows.size() || curve.ts.empty())
    throw InvalidArgument("recover_continuous: malformed curve");
  const FrameBounds fb = detail::require_full_space_frame(g, rank_tol);
  const Eigen::MatrixXcd aij = coefficient_matrix(a, g, g_dual);

  auto row_at = [&](double t) -> const HVector& {
    const Eigen::Index i = curve.find(t);
    if (i < 0)
      throw InvalidArgument("recover_continuous: curve missing sample at t = " +
                            std::to_string(t));
    return curve.rows[static_cast<std::size_t>(i)];
  };

  DifferenceScheme used = scheme;
  if (used == DifferenceScheme::automatic)
    used = curve.find(-h) >= 0 ? DifferenceScheme::central
                               : DifferenceScheme::forward;

  const HVector& d0 = row_at(0.0);
  auto slope_at_zero = [&](double step) -> HVector {
    if (used == DifferenceScheme::central)
      return (row_at(step) - row_at(-step)) / (2.0 * step);
    return (row_at(step) - d0) / step;
  };
  auto assemble = [&](const HVector& slope) {
    return g_dual.synthesize(HVector(slope - aij.adjoint() * d0));
  };

  RecoveryReport rep;
  rep.method = RecoveryMethod::continuous;
  const HVector coeffs = slope_at_zero(h) - aij.adjoint() * d0;
  rep.w_hat = g_dual.synthesize(coeffs);
  rep.stability_constant = detail::two_row_stability(a, fb);

  const bool doubled = curve.find(2.0 * h) >= 0 &&
                       (used != DifferenceScheme::central || curve.find(-2.0 * h) >= 0);
  if (doubled) {
    const int order = used == DifferenceScheme::central ? 2 : 1;
    const HVector coarse = assemble(slope_at_zero(2.0 * h));
    rep.residual = (rep.w_hat - coarse).norm() / ((1 << order) - 1);
  } else {
    rep.residual = detail::consistency_residual(g, coeffs, rep.w_hat);
  }
  return rep;
}

// Norm estimate of a linear data-to-source map on matrices of a given
// shape, against the Euclidean norm of the data: random probes give a
// lower bound, then power iteration on the materialized map refines it to
// the top singular value.
inline double estimate_stability(
    const std::function<HVector(const DataMatrix&)>& recover,
    Eigen::Index n_rows, Eigen::Index n_cols, int trials,
    std::uint64_t seed = 97531u) {
  if (n_rows < 1 || n_cols < 1)
    throw InvalidArgument("estimate_stability: empty data shape");
  if (trials < 1) throw InvalidArgument("estimate_stability: trials < 1");
  Rng rng(seed);

  auto matrix_of = [&](const Eigen::MatrixXcd& entries) {
    DataMatrix d(n_cols);
    for (Eigen::Index n = 0; n < n_rows; ++n)
      d.append_row(entries.row(n).transpose());
    return d;
  };

  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXcd entries = rng.matrix(n_rows, n_cols);
    const double denom = entries.norm();
    if (denom == 0.0) continue;
    best = std::max(best, recover(matrix_of(entries)).norm() / denom);
  }

  // Materialize the map column by column (the method is linear in the data).
  const Eigen::Index n_entries = n_rows * n_cols;
  Eigen::MatrixXcd basis_image;
  for (Eigen::Index k = 0; k < n_entries; ++k) {
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n_rows, n_cols);
    e(k / n_cols, k % n_cols) = 1.0;
    const HVector image = recover(matrix_of(e));
    if (k == 0) basis_image.resize(image.size(), n_entries);
    basis_image.col(k) = image;
  }

  HVector y = rng.unit_vector(n_entries);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    const HVector z = basis_image * y;
    const double next = z.squaredNorm();
    HVector back = basis_image.adjoint() * z;
    const double bn = back.norm();
    if (bn == 0.0) break;
    y = back / bn;
    if (it > 2 && std::abs(next - lambda) <= 1e-13 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::max(best, std::sqrt(lambda));
}

}  // namespace forcerec
