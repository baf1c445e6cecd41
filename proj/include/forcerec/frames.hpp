#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "forcerec/errors.hpp"
#include "forcerec/hilbert.hpp"

// Bessel/frame analysis of a finite vector system {g_j}. A system is stored
// through its synthesis matrix (column j = g_j); the analysis operator is
// its adjoint, v -> (<v,g_j>)_j, and the frame operator is their product.
// Frame bounds on a subspace W are the extreme eigenvalues of the frame
// operator compressed to W.

namespace forcerec {

class VectorSystem {
public:
  explicit VectorSystem(Eigen::MatrixXcd synthesis)
      : synthesis_(std::move(synthesis)) {
    if (synthesis_.rows() <= 0 || synthesis_.cols() <= 0)
      throw InvalidArgument("VectorSystem: needs at least one vector");
    if (!synthesis_.allFinite())
      throw InvalidArgument("VectorSystem: non-finite entries");
  }

  static VectorSystem from_vectors(const std::vector<HVector>& vectors) {
    if (vectors.empty())
      throw InvalidArgument("VectorSystem: needs at least one vector");
    Eigen::MatrixXcd m(vectors.front().size(),
                       static_cast<Eigen::Index>(vectors.size()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (vectors[static_cast<std::size_t>(j)].size() != m.rows())
        throw DimensionError("VectorSystem: vector dimension mismatch");
      m.col(j) = vectors[static_cast<std::size_t>(j)];
    }
    return VectorSystem(std::move(m));
  }

  static VectorSystem orthonormal_basis(Eigen::Index dim) {
    return VectorSystem(Eigen::MatrixXcd::Identity(dim, dim));
  }

  Eigen::Index dim() const { return synthesis_.rows(); }
  Eigen::Index count() const { return synthesis_.cols(); }
  const Eigen::MatrixXcd& synthesis() const { return synthesis_; }
  HVector vec(Eigen::Index j) const { return synthesis_.col(j); }

  // (<v, g_j>)_j
  HVector analyze(const HVector& v) const {
    if (v.size() != dim())
      throw DimensionError("VectorSystem::analyze: dimension mismatch");
    return synthesis_.adjoint() * v;
  }

  // sum_j c_j g_j
  HVector synthesize(const HVector& coeffs) const {
    if (coeffs.size() != count())
      throw DimensionError("VectorSystem::synthesize: coefficient count mismatch");
    return synthesis_ * coeffs;
  }

  HOperator frame_operator() const { return synthesis_ * synthesis_.adjoint(); }

private:
  Eigen::MatrixXcd synthesis_;  // dim x count
};

struct FrameBounds {
  double lower = 0.0;
  double upper = 0.0;
  Eigen::Index subspace_rank = 0;
};

// Scale-invariant cutoff separating genuine frames from numerically
// degenerate systems.
inline bool is_frame(const FrameBounds& b, double rank_tol = 1e-10) {
  return b.lower > rank_tol * b.upper;
}

// Optimal Bessel bound: largest eigenvalue of the frame operator
// (equivalently the squared top singular value of the synthesis matrix).
inline double bessel_bound(const VectorSystem& g) {
  Eigen::SelfAdjointEigenSolver<HOperator> es(g.frame_operator(),
                                              Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("bessel_bound: eigensolver failed on frame operator");
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

// Unit vector attaining the optimal Bessel bound.
inline HVector top_bessel_vector(const VectorSystem& g) {
  Eigen::SelfAdjointEigenSolver<HOperator> es(g.frame_operator());
  if (es.info() != Eigen::Success)
    throw NumericalError("top_bessel_vector: eigensolver failed");
  return es.eigenvectors().col(g.dim() - 1);  // eigenvalues ascend
}

// Bounds of c ||w||^2 <= sum_j |<w,g_j>|^2 <= C ||w||^2 over w in W. The
// vectors g_j need not lie in W.
inline FrameBounds frame_bounds_on(const VectorSystem& g, const Subspace& w) {
  if (w.dim() == 0) throw InvalidArgument("frame_bounds_on: empty subspace");
  if (g.dim() != w.ambient_dim())
    throw DimensionError("frame_bounds_on: ambient dimension mismatch");
  const Eigen::MatrixXcd c = w.basis().adjoint() * g.synthesis();  // k x J
  Eigen::SelfAdjointEigenSolver<HOperator> es(c * c.adjoint(),
                                              Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("frame_bounds_on: eigensolver failed");
  FrameBounds b;
  b.lower = std::max(0.0, es.eigenvalues().minCoeff());
  b.upper = std::max(0.0, es.eigenvalues().maxCoeff());
  b.subspace_rank = w.dim();
  return b;
}

// Canonical dual system {g~_j} within W: sum_j <w,g_j> g~_j = w for every
// w in W. Computed by inverting the frame operator compressed to W, so g
// need only be a frame for W, not for the whole space.
inline VectorSystem canonical_dual(const VectorSystem& g, const Subspace& w,
                                   double rank_tol = 1e-10) {
  const FrameBounds b = frame_bounds_on(g, w);
  if (!is_frame(b, rank_tol))
    throw FrameConditionError(
        "not a frame for W (lower " + std::to_string(b.lower) + ", upper " +
            std::to_string(b.upper) + ")",
        b.lower, b.upper);
  const Eigen::MatrixXcd c = w.basis().adjoint() * g.synthesis();  // k x J
  const HOperator s = c * c.adjoint();                             // k x k
  Eigen::LDLT<HOperator> ldlt(s);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("canonical_dual: factorization of frame operator failed");
  return VectorSystem(w.basis() * ldlt.solve(c));
}

inline VectorSystem canonical_dual(const VectorSystem& g,
                                   double rank_tol = 1e-10) {
  return canonical_dual(g, Subspace::full(g.dim()), rank_tol);
}

// Coefficients a_ij = <A* g_j, g~_i>, so that A* g_j = sum_i a_ij g_i
// whenever {g_j} is a frame for the full space with dual {g~_i}.
inline Eigen::MatrixXcd coefficient_matrix(const HOperator& a,
                                           const VectorSystem& g,
                                           const VectorSystem& g_dual) {
  if (a.rows() != a.cols()) throw DimensionError("coefficient_matrix: A not square");
  if (a.rows() != g.dim() || g.dim() != g_dual.dim() ||
      g.count() != g_dual.count())
    throw DimensionError("coefficient_matrix: dimension mismatch");
  return g_dual.synthesis().adjoint() * a.adjoint() * g.synthesis();
}

// The derived system {P_W (I - A*)^{-1} g_j}. Whether it is a frame for W
// decides stable recoverability from an unbounded sample horizon.
inline VectorSystem recoverability_system(const HOperator& a,
                                          const VectorSystem& g,
                                          const Subspace& w) {
  if (a.rows() != g.dim() || g.dim() != w.ambient_dim())
    throw DimensionError("recoverability_system: dimension mismatch");
  const Resolvent r = resolvent_at_one(a);
  // (I - A*)^{-1} = ((I - A)^{-1})*
  const Eigen::MatrixXcd lifted = r.op.adjoint() * g.synthesis();
  return VectorSystem(w.basis() * (w.basis().adjoint() * lifted));
}

}  // namespace forcerec
