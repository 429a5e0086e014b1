#pragma once

// Random measurement matrices: Gaussian, Bernoulli and row-subsampled
// Sylvester-Hadamard.
//
// Entries are drawn row by row, so for a fixed seed the m x N matrix holds the
// first m rows (up to the 1/sqrt(m) scale) of any taller matrix drawn with the
// same seed and N. Sweeps over m with a shared seed are therefore nested.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "bcmsv/block_core.hpp"
#include "bcmsv/csv.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

struct MeasurementMatrix {
  Matrix entries;
  std::string ensemble_label;
  std::uint64_t seed = 0;

  Eigen::Index rows() const noexcept { return entries.rows(); }
  Eigen::Index cols() const noexcept { return entries.cols(); }
};

namespace detail {

inline void check_shape(std::size_t m, std::size_t N, const char* who) {
  if (m < 1 || m > N) {
    throw ArgumentError(std::string(who) + ": need 1 <= m <= N, got m=" + std::to_string(m) +
                        ", N=" + std::to_string(N));
  }
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

inline MeasurementMatrix unit_normalize_columns(MeasurementMatrix a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double nrm = a.entries.col(j).norm();
    if (nrm == 0.0) {
      throw DegeneracyError("unit_normalize_columns: column " + std::to_string(j) + " is zero");
    }
    a.entries.col(j) /= nrm;
  }
  if (!detail::ends_with(a.ensemble_label, "-unit")) a.ensemble_label += "-unit";
  return a;
}

/// i.i.d. N(0, 1/m) entries; optionally rescaled to unit-norm columns.
inline MeasurementMatrix gen_gaussian(std::size_t m, std::size_t N, std::uint64_t seed,
                                      bool unit_columns) {
  detail::check_shape(m, N, "gen_gaussian");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = scale * rng.normal();
  MeasurementMatrix out{std::move(a), "gaussian", seed};
  return unit_columns ? unit_normalize_columns(std::move(out)) : out;
}

/// i.i.d. +-1/sqrt(m) entries; columns have unit norm by construction.
inline MeasurementMatrix gen_bernoulli(std::size_t m, std::size_t N, std::uint64_t seed) {
  detail::check_shape(m, N, "gen_bernoulli");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = scale * rng.sign();
  return {std::move(a), "bernoulli", seed};
}

/// Sylvester Hadamard matrix of order N (power of two), entries +-1.
inline Matrix sylvester_hadamard(std::size_t N) {
  if (N == 0 || (N & (N - 1)) != 0) {
    throw ArgumentError("sylvester_hadamard: N=" + std::to_string(N) + " is not a power of two");
  }
  Matrix h(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  h(0, 0) = 1.0;
  for (Eigen::Index size = 1; size < h.rows(); size *= 2) {
    h.block(0, size, size, size) = h.block(0, 0, size, size);
    h.block(size, 0, size, size) = h.block(0, 0, size, size);
    h.block(size, size, size, size) = -h.block(0, 0, size, size);
  }
  return h;
}

/// First m rows of a seed-permuted Sylvester Hadamard matrix, scaled by
/// 1/sqrt(m) so every column has unit norm.
inline MeasurementMatrix gen_hadamard_submatrix(std::size_t m, std::size_t N, std::uint64_t seed) {
  const Matrix h = sylvester_hadamard(N);
  detail::check_shape(m, N, "gen_hadamard_submatrix");
  std::vector<Eigen::Index> perm(N);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  for (std::size_t i = N - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i + 1));
    std::swap(perm[i], perm[j]);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) = scale * h.row(perm[static_cast<std::size_t>(i)]);
  return {std::move(a), "hadamard", seed};
}

/// Dispatch by ensemble name: "gaussian", "gaussian-unit", "bernoulli", "hadamard".
inline MeasurementMatrix generate(const std::string& ensemble, std::size_t m, std::size_t N,
                                  std::uint64_t seed) {
  if (ensemble == "gaussian") return gen_gaussian(m, N, seed, false);
  if (ensemble == "gaussian-unit") return gen_gaussian(m, N, seed, true);
  if (ensemble == "bernoulli" || ensemble == "bernoulli-unit") return gen_bernoulli(m, N, seed);
  if (ensemble == "hadamard" || ensemble == "hadamard-unit") return gen_hadamard_submatrix(m, N, seed);
  throw ArgumentError("unknown ensemble '" + ensemble + "'");
}

// ---------------------------------------------------------------------------
// CSV: first line "m,N,ensemble_label,seed", then m rows of N values.

inline void write_matrix_csv(std::ostream& os, const MeasurementMatrix& a) {
  os << a.rows() << ',' << a.cols() << ',' << a.ensemble_label << ',' << a.seed << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) os << ',';
      os << csv::format_double(a.entries(i, j));
    }
    os << '\n';
  }
}

inline MeasurementMatrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ArgumentError("read_matrix_csv: empty input");
  const auto h = csv::split(line);
  if (h.size() != 4) throw ArgumentError("read_matrix_csv: header must be m,N,ensemble_label,seed");
  const auto m = csv::parse_int<Eigen::Index>(h[0]);
  const auto N = csv::parse_int<Eigen::Index>(h[1]);
  if (m < 1 || N < 1) throw ArgumentError("read_matrix_csv: bad shape");
  MeasurementMatrix a{Matrix(m, N), std::string(csv::trim(h[2])), csv::parse_int<std::uint64_t>(h[3])};
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::getline(is, line)) throw ArgumentError("read_matrix_csv: too few rows");
    const auto f = csv::split(line);
    if (static_cast<Eigen::Index>(f.size()) != N) {
      throw ArgumentError("read_matrix_csv: row " + std::to_string(i) + " has wrong length");
    }
    for (Eigen::Index j = 0; j < N; ++j) a.entries(i, j) = csv::parse_double(f[static_cast<std::size_t>(j)]);
  }
  return a;
}

}  // namespace bcmsv
