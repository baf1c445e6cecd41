#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>

namespace forcerec {

// Seeded random stream. Gaussian draws are generated by an explicit
// Box-Muller transform on raw engine output so that a given seed produces
// the same sequence regardless of the standard library's distribution
// implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t integer() { return engine_(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::complex<double> gaussian_complex() {
    const double re = gaussian();
    const double im = gaussian();
    return {M_SQRT1_2 * re, M_SQRT1_2 * im};
  }

  Eigen::VectorXcd vector(Eigen::Index dim) {
    Eigen::VectorXcd v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v(k) = gaussian_complex();
    return v;
  }

  Eigen::VectorXcd unit_vector(Eigen::Index dim) {
    Eigen::VectorXcd v = vector(dim);
    while (v.norm() < 1e-12) v = vector(dim);
    return v / v.norm();
  }

  Eigen::MatrixXcd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian_complex();
    return m;
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace forcerec
