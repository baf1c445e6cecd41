#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "forcerec/errors.hpp"
#include "forcerec/hilbert.hpp"
#include "forcerec/measurement.hpp"
#include "forcerec/recovery.hpp"

// File formats.
//   data matrix CSV:  header "n,j,re,im", one record per entry, row-major,
//                     rows indexed from n = 0.
//   trajectory CSV:   header "n,k,re,im", k the coordinate index.
// Floating-point text uses 17 significant digits so that values round-trip.

namespace forcerec {
namespace io {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_data_matrix_csv(const DataMatrix& d, std::ostream& out) {
  out << "n,j,re,im\n";
  for (Eigen::Index n = 0; n < d.row_count(); ++n)
    for (Eigen::Index j = 0; j < d.col_count(); ++j)
      out << n << ',' << j << ',' << fmt17(d.row(n)(j).real()) << ','
          << fmt17(d.row(n)(j).imag()) << '\n';
}

inline void write_data_matrix_csv(const DataMatrix& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  write_data_matrix_csv(d, out);
}

inline void write_trajectory_csv(const std::vector<HVector>& states,
                                 std::ostream& out) {
  out << "n,k,re,im\n";
  for (std::size_t n = 0; n < states.size(); ++n)
    for (Eigen::Index k = 0; k < states[n].size(); ++k)
      out << n << ',' << k << ',' << fmt17(states[n](k).real()) << ','
          << fmt17(states[n](k).imag()) << '\n';
}

inline void write_trajectory_csv(const std::vector<HVector>& states,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  write_trajectory_csv(states, out);
}

inline DataMatrix read_data_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("n,j,re,im", 0) != 0)
    throw ConfigError("data matrix CSV must start with header n,j,re,im");
  std::vector<std::vector<Complex>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    long n, j;
    double re, im;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf", &n, &j, &re, &im) != 4)
      throw ConfigError("malformed data matrix CSV record: " + line);
    if (n < 0 || j < 0) throw ConfigError("negative index in data matrix CSV");
    if (static_cast<std::size_t>(n) >= rows.size())
      rows.resize(static_cast<std::size_t>(n) + 1);
    auto& row = rows[static_cast<std::size_t>(n)];
    if (static_cast<std::size_t>(j) >= row.size())
      row.resize(static_cast<std::size_t>(j) + 1, Complex(0, 0));
    row[static_cast<std::size_t>(j)] = Complex(re, im);
  }
  if (rows.empty()) throw ConfigError("data matrix CSV has no records");
  const std::size_t cols = rows.front().size();
  DataMatrix d(static_cast<Eigen::Index>(cols));
  for (const auto& r : rows) {
    if (r.size() != cols)
      throw ConfigError("ragged rows in data matrix CSV");
    HVector v(static_cast<Eigen::Index>(cols));
    for (std::size_t j = 0; j < cols; ++j) v(static_cast<Eigen::Index>(j)) = r[j];
    d.append_row(v);
  }
  return d;
}

inline DataMatrix read_data_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  return read_data_matrix_csv(in);
}

inline nlohmann::json complex_json(const Complex& z) {
  return nlohmann::json::array({z.real(), z.imag()});
}

inline nlohmann::json vector_json(const HVector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(complex_json(v(k)));
  return arr;
}

// Norm/membership report for a data matrix.
inline nlohmann::json membership_report(const DataMatrix& d,
                                        const StrongResult& strong, double eps) {
  nlohmann::json rep;
  rep["norm_sup"] = norm_sup(d);
  rep["norm_finite"] =
      d.unbounded() ? nlohmann::json(nullptr) : nlohmann::json(norm_finite(d));
  rep["is_strong"] = strong.is_strong;
  rep["eps"] = eps;
  rep["limit_row_index"] = strong.limit_row_index;
  return rep;
}

inline nlohmann::json recovery_report_json(const RecoveryReport& rep) {
  nlohmann::json j;
  j["method"] = to_string(rep.method);
  j["w_hat"] = vector_json(rep.w_hat);
  j["residual"] = rep.residual;
  j["stability_constant"] = rep.stability_constant;
  j["trace"] = rep.trace;
  if (rep.subspace_coords.size() > 0)
    j["subspace_coords"] = vector_json(rep.subspace_coords);
  return j;
}

}  // namespace io
}  // namespace forcerec
