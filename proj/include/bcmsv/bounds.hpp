#pragma once

// Recovery error bounds in terms of the q-ratio BCMSV, the classical block
// RIP bound, Monte Carlo estimation of the block RIC, and the comparison of
// the two bound families on a given matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bcmsv/bcmsv_estimator.hpp"
#include "bcmsv/block_core.hpp"
#include "bcmsv/csv.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/recovery_solvers.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

struct BoundInput {
  double beta = 0.0;
  std::size_t k = 1;
  double q = 2.0;
  /// zeta for BBP, mu for BDS and the group lasso.
  double noise_level = 0.0;
  /// Group lasso only.
  std::optional<double> kappa;
  /// Compressible case only.
  double phi_k = 0.0;
};

struct ErrorBounds {
  double l2q_bound = 0.0;
  double l21_bound = 0.0;
  /// Sparsity level s at which beta must be evaluated.
  double required_scale = 0.0;
};

namespace detail {

/// k^{1-1/q}, with the q = inf limit k.
inline double k_power(double k, double q) { return std::isinf(q) ? k : std::pow(k, 1.0 - 1.0 / q); }

/// c^{q/(q-1)}, with the q = inf limit c.
inline double dual_power(double c, double q) { return std::isinf(q) ? c : std::pow(c, q / (q - 1.0)); }

inline double checked_kappa(std::optional<double> given) {
  if (!given) throw ArgumentError("group lasso bounds need kappa");
  const double kappa = *given;
  if (!(kappa > 0.0 && kappa < 1.0)) throw ArgumentError("kappa must lie in (0, 1)");
  return kappa;
}

inline void check_input(const BoundInput& in) {
  if (!(in.beta > 0.0)) throw ArgumentError("bounds are undefined for beta <= 0");
  if (in.k < 1) throw ArgumentError("k must be >= 1");
  if (!(in.q > 1.0)) throw ArgumentError("q must be > 1");
  if (!(in.noise_level >= 0.0)) throw ArgumentError("noise level must be >= 0");
  if (!(in.phi_k >= 0.0)) throw ArgumentError("phi_k must be >= 0");
}

}  // namespace detail

/// Sparsity level for the block-sparse bounds: 2^{q/(q-1)} k, or
/// (2/(1-kappa))^{q/(q-1)} k for the group lasso.
inline double theorem1_scale(Program program, std::size_t k, double q, std::optional<double> kappa = {}) {
  const double c = program == Program::GroupLasso
                       ? 2.0 / (1.0 - detail::checked_kappa(kappa))
                       : 2.0;
  return detail::dual_power(c, q) * static_cast<double>(k);
}

/// Sparsity level for the compressible bounds: 4^{q/(q-1)} k, or
/// (4/(1-kappa))^{q/(q-1)} k for the group lasso.
inline double theorem2_scale(Program program, std::size_t k, double q, std::optional<double> kappa = {}) {
  const double c = program == Program::GroupLasso
                       ? 4.0 / (1.0 - detail::checked_kappa(kappa))
                       : 4.0;
  return detail::dual_power(c, q) * static_cast<double>(k);
}

/// Error bounds for a block k-sparse signal.
inline ErrorBounds theorem1_bounds(const BoundInput& in, Program program) {
  detail::check_input(in);
  const double k = static_cast<double>(in.k);
  const double kp = detail::k_power(k, in.q);
  const double b = in.beta;
  const double e = in.noise_level;
  ErrorBounds out;
  out.required_scale = theorem1_scale(program, in.k, in.q, in.kappa);
  switch (program) {
    case Program::BBP:
      out.l2q_bound = 2.0 * e / b;
      out.l21_bound = 4.0 * kp * e / b;
      break;
    case Program::BDS:
      out.l2q_bound = 4.0 * kp * e / (b * b);
      out.l21_bound = 8.0 * kp * kp * e / (b * b);
      break;
    case Program::GroupLasso: {
      const double kappa = detail::checked_kappa(in.kappa);
      out.l2q_bound = (1.0 + kappa) / (1.0 - kappa) * 2.0 * kp * e / (b * b);
      out.l21_bound = (1.0 + kappa) / ((1.0 - kappa) * (1.0 - kappa)) * 4.0 * kp * kp * e / (b * b);
      break;
    }
  }
  return out;
}

/// Error bounds for a block compressible signal with defect phi_k.
inline ErrorBounds theorem2_bounds(const BoundInput& in, Program program) {
  detail::check_input(in);
  const double k = static_cast<double>(in.k);
  const double kp = detail::k_power(k, in.q);
  const double defect = in.phi_k / kp;  // k^{1/q-1} phi_k
  const double b = in.beta;
  const double e = in.noise_level;
  ErrorBounds out;
  out.required_scale = theorem2_scale(program, in.k, in.q, in.kappa);
  switch (program) {
    case Program::BBP:
      out.l2q_bound = 2.0 * e / b + defect;
      out.l21_bound = 4.0 * kp * e / b + 4.0 * in.phi_k;
      break;
    case Program::BDS:
      out.l2q_bound = 8.0 * kp * e / (b * b) + defect;
      out.l21_bound = 16.0 * kp * kp * e / (b * b) + 4.0 * in.phi_k;
      break;
    case Program::GroupLasso: {
      const double kappa = detail::checked_kappa(in.kappa);
      out.l2q_bound = (1.0 + kappa) / (1.0 - kappa) * 4.0 * kp * e / (b * b) + defect;
      out.l21_bound = (1.0 + kappa) / ((1.0 - kappa) * (1.0 - kappa)) * 8.0 * kp * kp * e / (b * b) +
                      4.0 / (1.0 - kappa) * in.phi_k;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block RIC

struct RicEstimate {
  double delta_2k = 0.0;
  int num_samples = 0;
  bool admissible = false;
  /// Every 2k-subset was visited, so delta_2k is exact.
  bool exhaustive = false;
};

inline const double kRicThreshold = std::sqrt(2.0) - 1.0;

namespace detail {

/// C(n, r), saturating at `cap` + 1.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t r, std::uint64_t cap) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  long double acc = 1.0L;
  for (std::uint64_t i = 1; i <= r; ++i) {
    acc = acc * static_cast<long double>(n - r + i) / static_cast<long double>(i);
    if (acc > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(acc)));
}

inline double ric_statistic(const Matrix& a, const BlockPartition& part, const std::vector<std::size_t>& blocks) {
  const auto n = static_cast<Eigen::Index>(part.block_len());
  Matrix sub(a.rows(), n * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    sub.middleCols(static_cast<Eigen::Index>(j) * n, n) = a.middleCols(static_cast<Eigen::Index>(blocks[j]) * n, n);
  }
  Eigen::JacobiSVD<Matrix> svd(sub);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  // a wide submatrix has a zero singular value on its column space
  const double smin = sub.cols() > sub.rows() ? 0.0 : sv[sv.size() - 1];
  return std::max(smax * smax - 1.0, 1.0 - smin * smin);
}

}  // namespace detail

/// Lower estimate of delta_2k: the largest max(sigma_max^2 - 1, 1 - sigma_min^2)
/// over `num_samples` random 2k-block column submatrices, or over all of them
/// when there are no more than `num_samples`. Sample j depends only on (seed,
/// j), so a larger budget sees a superset of subsets.
inline RicEstimate estimate_block_ric(const Matrix& a, const BlockPartition& part, std::size_t k,
                                      int num_samples = 1000, std::uint64_t seed = 20190101) {
  const std::size_t p = part.num_blocks();
  if (k < 1 || 2 * k > p) throw ArgumentError("estimate_block_ric: need 1 <= 2k <= p");
  if (num_samples < 1) throw ArgumentError("estimate_block_ric: num_samples must be >= 1");
  if (static_cast<std::size_t>(a.cols()) != part.total_len()) {
    throw ArgumentError("estimate_block_ric: partition does not match matrix columns");
  }
  const std::size_t r = 2 * k;
  RicEstimate est;
  const auto total = detail::binomial_capped(p, r, static_cast<std::uint64_t>(num_samples));
  if (total <= static_cast<std::uint64_t>(num_samples)) {
    est.exhaustive = true;
    std::vector<std::size_t> idx(r);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      est.delta_2k = std::max(est.delta_2k, detail::ric_statistic(a, part, idx));
      ++est.num_samples;
      // next combination in lexicographic order
      std::size_t i = r;
      while (i > 0 && idx[i - 1] == p - r + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    std::vector<std::size_t> perm(p);
    for (int s = 0; s < num_samples; ++s) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < r; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.index(p - i));
        std::swap(perm[i], perm[j]);
      }
      std::vector<std::size_t> blocks(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(r));
      std::sort(blocks.begin(), blocks.end());
      est.delta_2k = std::max(est.delta_2k, detail::ric_statistic(a, part, blocks));
      ++est.num_samples;
    }
  }
  est.admissible = est.delta_2k < kRicThreshold;
  return est;
}

/// 4 sqrt(1+delta) / (1 - (1+sqrt 2) delta) k^{1/q-1/2} zeta for 0 < q <= 2;
/// empty when delta >= sqrt(2) - 1.
inline std::optional<double> ric_bound(double delta_2k, std::size_t k, double q, double zeta) {
  if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("ric_bound: q must lie in (0, 2]");
  if (!(delta_2k >= 0.0)) throw ArgumentError("ric_bound: delta must be >= 0");
  if (delta_2k >= kRicThreshold) return std::nullopt;
  const double factor = 4.0 * std::sqrt(1.0 + delta_2k) / (1.0 - (1.0 + std::sqrt(2.0)) * delta_2k);
  return factor * std::pow(static_cast<double>(k), 1.0 / q - 0.5) * zeta;
}

// ---------------------------------------------------------------------------
// BCMSV bound against RIC bound on one matrix

struct BoundComparison {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  double q = 0.0;
  double beta = 0.0;
  double bcmsv_bound = 0.0;
  double delta_2k = 0.0;
  std::optional<double> ric_bound;
};

inline const char* kComparisonCsvHeader = "m,k,n,q,beta,bcmsv_bound,delta2k,ric_bound";

/// BBP l2/lq bounds from both families. beta is estimated at the block-sparse
/// scale 2^{q/(q-1)} k, clamped to p, where the sparsity constraint is vacuous.
inline BoundComparison compare_bounds(const Matrix& a, const BlockPartition& part, std::size_t k, double q,
                                      double zeta, const BcmsvOptions& bcmsv_options, int ric_samples,
                                      std::uint64_t seed) {
  if (!(q > 1.0 && q <= 2.0)) throw ArgumentError("compare_bounds: q must lie in (1, 2]");
  BoundComparison row;
  row.m = static_cast<std::size_t>(a.rows());
  row.k = k;
  row.n = part.block_len();
  row.q = q;
  const double scale = std::min(theorem1_scale(Program::BBP, k, q), static_cast<double>(part.num_blocks()));
  BcmsvOptions opt = bcmsv_options;
  opt.seed = derive_seed(seed, 0);
  row.beta = estimate_bcmsv(BcmsvProblem{a, part, q, scale}, opt).value;
  row.bcmsv_bound = theorem1_bounds(BoundInput{row.beta, k, q, zeta, {}, 0.0}, Program::BBP).l2q_bound;
  const RicEstimate ric = estimate_block_ric(a, part, k, ric_samples, derive_seed(seed, 1));
  row.delta_2k = ric.delta_2k;
  row.ric_bound = ric_bound(ric.delta_2k, k, q, zeta);
  return row;
}

inline void write_comparison_row(std::ostream& os, const BoundComparison& r) {
  os << r.m << ',' << r.k << ',' << r.n << ',' << csv::format_double(r.q) << ',' << csv::format_double(r.beta) << ','
     << csv::format_double(r.bcmsv_bound) << ',' << csv::format_double(r.delta_2k) << ','
     << (r.ric_bound ? csv::format_double(*r.ric_bound) : std::string("NA")) << '\n';
}

}  // namespace bcmsv
