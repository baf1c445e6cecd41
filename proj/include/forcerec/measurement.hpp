#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "forcerec/errors.hpp"
#include "forcerec/frames.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/random.hpp"

// Time-space sample matrices and the measurement-space machinery built on
// them. A data matrix D holds one row per time step, row n carrying the
// samples (<x_n, g_j>)_j. Two norms live on such matrices:
//
//   norm_finite(D) = sum_n ||r_n||_2      (finite horizons)
//   norm_sup(D)    = sup_n ||r_n||_2      (unbounded horizons)
//
// The latter equals the operator norm of D from square-summable sequences
// to bounded sequences. Matrices whose rows converge support a limit
// synthesis sum_j t_j g_j through any vector system G; that map is bounded
// with norm exactly sqrt(bessel_bound(G)).
//
// Membership in the convergent-row class is only decidable from finitely
// many rows through a surrogate: a Cauchy test on a tail window of the
// realized rows (is_strong). Row indices count from n = 0.

namespace forcerec {

class DataMatrix {
public:
  // `unbounded` marks a matrix whose rows are a prefix of a stream that has
  // no final horizon; the finite-horizon norm is undefined for such data.
  explicit DataMatrix(Eigen::Index cols, bool unbounded = false)
      : cols_(cols), unbounded_(unbounded) {
    if (cols <= 0) throw InvalidArgument("DataMatrix: column count <= 0");
  }

  static DataMatrix from_rows(const std::vector<HVector>& rows,
                              bool unbounded = false) {
    if (rows.empty()) throw InvalidArgument("DataMatrix: no rows");
    DataMatrix d(rows.front().size(), unbounded);
    for (const HVector& r : rows) d.append_row(r);
    return d;
  }

  // Single-producer append; readers may share the matrix freely once the
  // producer is done.
  void append_row(const HVector& row) {
    if (row.size() != cols_)
      throw DimensionError("DataMatrix::append_row: row length mismatch");
    if (!row.allFinite())
      throw InvalidArgument("DataMatrix::append_row: non-finite entries");
    rows_.push_back(row);
  }

  Eigen::Index row_count() const { return static_cast<Eigen::Index>(rows_.size()); }
  Eigen::Index col_count() const { return cols_; }
  bool unbounded() const { return unbounded_; }
  const HVector& row(Eigen::Index n) const { return rows_[static_cast<std::size_t>(n)]; }
  const std::vector<HVector>& rows() const { return rows_; }

  // Action (Dx)_n = sum_j d_nj x_j -- the operator the sup norm measures.
  // No conjugation: this is matrix application, not a pairing.
  HVector apply(const HVector& x) const {
    if (x.size() != cols_)
      throw DimensionError("DataMatrix::apply: vector length mismatch");
    HVector out(row_count());
    for (Eigen::Index n = 0; n < row_count(); ++n)
      out(n) = rows_[static_cast<std::size_t>(n)].transpose() * x;
    return out;
  }

private:
  std::vector<HVector> rows_;
  Eigen::Index cols_;
  bool unbounded_;
};

inline double norm_finite(const DataMatrix& d) {
  if (d.unbounded())
    throw DataError("finite-N norm on unbounded data");
  double sum = 0.0;
  for (const HVector& r : d.rows()) sum += r.norm();
  return sum;
}

// For unbounded matrices this is the sup over the rows generated so far,
// i.e. a partial value.
inline double norm_sup(const DataMatrix& d) {
  double sup = 0.0;
  for (const HVector& r : d.rows()) sup = std::max(sup, r.norm());
  return sup;
}

// For each row, the vector x_j = conj(d_nj) aligns every term of (Dx)_n, so
// the ratio ||Dx||_inf / ||x||_2 attains that row's norm. Taking the row of
// maximal norm attains norm_sup exactly.
inline HVector norm_sup_maximizer(const DataMatrix& d) {
  if (d.row_count() == 0) throw InvalidArgument("norm_sup_maximizer: no rows");
  Eigen::Index best = 0;
  for (Eigen::Index n = 1; n < d.row_count(); ++n)
    if (d.row(n).norm() > d.row(best).norm()) best = n;
  return d.row(best).conjugate();
}

inline DataMatrix linear_combination(Complex alpha, const DataMatrix& a,
                                     Complex beta, const DataMatrix& b) {
  if (a.row_count() != b.row_count() || a.col_count() != b.col_count())
    throw DimensionError("linear_combination: shape mismatch");
  DataMatrix out(a.col_count(), a.unbounded() || b.unbounded());
  for (Eigen::Index n = 0; n < a.row_count(); ++n)
    out.append_row(alpha * a.row(n) + beta * b.row(n));
  return out;
}

struct StrongResult {
  bool is_strong = false;
  HVector limit_row;             // final row, the limit estimate
  Eigen::Index limit_row_index = 0;
  double max_tail_gap = 0.0;     // max ||r_i - r_last|| over the window
  Eigen::Index window = 0;       // number of trailing rows examined
};

// Finite-data surrogate for row convergence: the rows are accepted as
// eps-Cauchy when every row in the trailing window (the last max(4, N/4)
// rows) lies within eps of the final row. The final row doubles as the
// limit estimate; under geometric state convergence its error is of the
// order of the last contraction step, so no extrapolation is attempted.
inline StrongResult is_strong(const DataMatrix& d, double eps) {
  if (eps <= 0.0) throw InvalidArgument("is_strong: eps must be positive");
  const Eigen::Index n = d.row_count();
  if (n < 2) throw InvalidArgument("is_strong: needs at least 2 rows");
  StrongResult res;
  res.limit_row = d.row(n - 1);
  res.limit_row_index = n - 1;
  res.window = std::min<Eigen::Index>(n, std::max<Eigen::Index>(4, n / 4));
  for (Eigen::Index i = n - res.window; i < n; ++i)
    res.max_tail_gap =
        std::max(res.max_tail_gap, (d.row(i) - res.limit_row).norm());
  res.is_strong = res.max_tail_gap < eps;
  return res;
}

// Limit synthesis sum_j t_j g_j of the estimated limit row t through G.
inline HVector limit_synthesis(const DataMatrix& d, const VectorSystem& g,
                               double eps) {
  if (d.col_count() != g.count())
    throw DimensionError("limit_synthesis: column/system count mismatch");
  const StrongResult res = is_strong(d, eps);
  if (!res.is_strong) {
    char gap[32];
    std::snprintf(gap, sizeof(gap), "%.3g", res.max_tail_gap);
    throw DataError(std::string("data not in B^s: rows fail the eps-Cauchy "
                                "tail test (max tail gap ") + gap + ")");
  }
  return g.synthesize(res.limit_row);
}

// Largest observed ratio ||limit_synthesis(D)|| / norm_sup(D) over trial
// matrices with convergent rows. The trial set always includes the
// constant-row matrix built from the top Bessel vector of G, which attains
// the supremum sqrt(bessel_bound(G)) exactly; random constant-row trials
// can only fall below it.
inline double operator_norm_ratio(const VectorSystem& g, int trials,
                                  std::uint64_t seed = 20240u) {
  if (trials < 1) throw InvalidArgument("operator_norm_ratio: trials < 1");
  Rng rng(seed);
  const double eps = 1e-9;
  double best = 0.0;
  auto ratio_of = [&](const HVector& row, Eigen::Index n_rows) {
    DataMatrix d(g.count());
    for (Eigen::Index n = 0; n < n_rows; ++n) d.append_row(row);
    const double denom = norm_sup(d);
    if (denom == 0.0) return 0.0;
    return limit_synthesis(d, g, eps).norm() / denom;
  };
  best = ratio_of(g.analyze(top_bessel_vector(g)), 4);
  for (int t = 0; t < trials; ++t)
    best = std::max(best, ratio_of(rng.vector(g.count()), 4));
  return best;
}

}  // namespace forcerec
