#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "forcerec/errors.hpp"

// Finite truncation of a separable complex Hilbert space: vectors, bounded
// operators, orthonormal subspaces and the spectral utilities the rest of
// the library is built on. The ambient dimension is fixed per object; all
// operations check it.
//
// Convention: the inner product <u,v> = sum_k u_k * conj(v_k) is linear in
// its first argument. Every adjoint in the library is taken with respect to
// this pairing.

namespace forcerec {

using Complex = std::complex<double>;
using HVector = Eigen::VectorXcd;
using HOperator = Eigen::MatrixXcd;

inline Complex inner(const HVector& u, const HVector& v) {
  if (u.size() != v.size())
    throw DimensionError("inner: dimension mismatch (" +
                         std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()) + ")");
  // Eigen's dot conjugates its callee, so v.dot(u) = sum u_k conj(v_k).
  return v.dot(u);
}

inline bool entries_finite(const HVector& v) { return v.allFinite(); }
inline bool entries_finite(const HOperator& op) { return op.allFinite(); }

// Largest singular value, i.e. the operator 2-norm.
inline double operator_norm(const HOperator& op) {
  if (op.size() == 0) return 0.0;
  Eigen::JacobiSVD<HOperator> svd(op);
  return svd.singularValues()(0);
}

// Integer operator power by repeated squaring.
inline HOperator operator_power(const HOperator& op, long n) {
  if (op.rows() != op.cols()) throw DimensionError("operator_power: not square");
  if (n < 0) throw InvalidArgument("operator_power: negative exponent");
  HOperator result = HOperator::Identity(op.rows(), op.cols());
  HOperator base = op;
  while (n > 0) {
    if (n & 1) result = result * base;
    base = base * base;
    n >>= 1;
  }
  return result;
}

// A subspace held as an orthonormal basis matrix (columns). User-supplied
// generating vectors are re-orthonormalized on construction by modified
// Gram-Schmidt with a 1e-12 drop tolerance, so near-orthonormal input is
// accepted and dependent directions are discarded.
class Subspace {
public:
  // The zero subspace of an ambient space.
  explicit Subspace(Eigen::Index ambient_dim)
      : basis_(ambient_dim, 0) {
    if (ambient_dim <= 0) throw InvalidArgument("Subspace: ambient dim <= 0");
  }

  static Subspace full(Eigen::Index ambient_dim) {
    Subspace w(ambient_dim);
    w.basis_ = HOperator::Identity(ambient_dim, ambient_dim);
    return w;
  }

  static Subspace span(const std::vector<HVector>& generators) {
    if (generators.empty())
      throw InvalidArgument("Subspace::span: no generators");
    Eigen::MatrixXcd cols(generators.front().size(),
                          static_cast<Eigen::Index>(generators.size()));
    for (Eigen::Index j = 0; j < cols.cols(); ++j) {
      if (generators[static_cast<std::size_t>(j)].size() != cols.rows())
        throw DimensionError("Subspace::span: generator dimension mismatch");
      cols.col(j) = generators[static_cast<std::size_t>(j)];
    }
    return span(cols);
  }

  static Subspace span(const Eigen::MatrixXcd& generators) {
    Subspace w(generators.rows());
    std::vector<HVector> accepted;
    for (Eigen::Index j = 0; j < generators.cols(); ++j) {
      HVector v = generators.col(j);
      const double original = v.norm();
      if (original < 1e-300) continue;
      // Two MGS sweeps keep the Gram matrix at identity to ~1e-15 even for
      // nearly dependent input.
      for (int sweep = 0; sweep < 2; ++sweep)
        for (const HVector& b : accepted) v -= inner(v, b) * b;
      if (v.norm() <= 1e-12 * original) continue;
      accepted.push_back(v / v.norm());
    }
    w.basis_.resize(generators.rows(),
                    static_cast<Eigen::Index>(accepted.size()));
    for (Eigen::Index j = 0; j < w.basis_.cols(); ++j)
      w.basis_.col(j) = accepted[static_cast<std::size_t>(j)];
    return w;
  }

  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const Eigen::MatrixXcd& basis() const { return basis_; }
  HVector basis_vector(Eigen::Index k) const { return basis_.col(k); }

  HOperator projector() const { return basis_ * basis_.adjoint(); }

  HVector project(const HVector& v) const {
    if (v.size() != ambient_dim())
      throw DimensionError("Subspace::project: dimension mismatch");
    return basis_ * (basis_.adjoint() * v);
  }

  // Coordinates of v relative to the stored basis (v need not lie in the
  // subspace; the coordinates describe its projection).
  HVector coords(const HVector& v) const {
    if (v.size() != ambient_dim())
      throw DimensionError("Subspace::coords: dimension mismatch");
    return basis_.adjoint() * v;
  }

  HVector from_coords(const HVector& y) const {
    if (y.size() != dim())
      throw DimensionError("Subspace::from_coords: dimension mismatch");
    return basis_ * y;
  }

  bool contains(const HVector& v, double tol = 1e-10) const {
    return (project(v) - v).norm() <= tol * std::max(1.0, v.norm());
  }

private:
  Eigen::MatrixXcd basis_;  // ambient_dim x dim, orthonormal columns
};

inline HVector project(const Subspace& w, const HVector& v) {
  return w.project(v);
}

// Largest eigenvalue modulus.
inline double spectral_radius(const HOperator& op) {
  if (op.rows() != op.cols())
    throw DimensionError("spectral_radius: operator not square");
  if (!entries_finite(op))
    throw InvalidArgument("spectral_radius: non-finite entries");
  if (op.rows() == 0) return 0.0;
  Eigen::ComplexEigenSolver<HOperator> solver(op, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NumericalError("spectral_radius: eigensolver failed to converge on " +
                         std::to_string(op.rows()) + "x" +
                         std::to_string(op.cols()) + " operator");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

struct Resolvent {
  HOperator op;      // (I - A)^{-1}
  double condition;  // kappa_2(I - A)
};

// Inverse of (I - A), rejected when 1 is (numerically) in the spectrum.
// The inverse is assembled from the SVD of I - A, whose extreme singular
// values also provide the reported condition number.
inline Resolvent resolvent_at_one(const HOperator& a,
                                  double condition_limit = 1e12) {
  if (a.rows() != a.cols())
    throw DimensionError("resolvent_at_one: operator not square");
  const Eigen::Index d = a.rows();
  const HOperator m = HOperator::Identity(d, d) - a;
  Eigen::BDCSVD<HOperator> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double smax = sigma(0);
  const double smin = sigma(d - 1);
  const double kappa = (smin > 0.0) ? smax / smin
                                    : std::numeric_limits<double>::infinity();
  if (!(smin > 0.0) || kappa > condition_limit)
    throw NumericalError(
        "ill-conditioned resolvent: 1 is in (or too near) the spectrum, "
        "condition " + std::to_string(kappa),
        kappa);
  Eigen::VectorXd inv_sigma = sigma.cwiseInverse();
  Resolvent r;
  r.op = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().adjoint();
  r.condition = kappa;
  return r;
}

// Partial geometric sum I + A + ... + A^{n-1}; the empty sum (n = 0) is the
// zero operator.
inline HOperator geometric_sum(const HOperator& a, long n) {
  if (a.rows() != a.cols())
    throw DimensionError("geometric_sum: operator not square");
  if (n < 0) throw InvalidArgument("geometric_sum: negative length");
  const Eigen::Index d = a.rows();
  HOperator sum = HOperator::Zero(d, d);
  HOperator power = HOperator::Identity(d, d);
  for (long k = 0; k < n; ++k) {
    sum += power;
    power = power * a;
  }
  return sum;
}

}  // namespace forcerec
