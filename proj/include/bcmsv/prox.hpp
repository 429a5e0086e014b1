#pragma once

// Closed-form projections and proximal maps on block-structured vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bcmsv/block_core.hpp"
#include "bcmsv/errors.hpp"

namespace bcmsv {

/// Euclidean projection of a non-negative vector onto {r >= 0 : sum(r) <= radius}.
/// Returns the soft-threshold level theta (0 when already inside).
inline double simplex_threshold(const Eigen::Ref<const Vector>& r, double radius) {
  if (r.sum() <= radius) return 0.0;
  std::vector<double> sorted(r.begin(), r.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  return theta;
}

/// Euclidean projection onto the mixed l2/l1 ball {z : ||z||_{2,1} <= radius}.
///
/// The vector of block norms is projected onto the l1 ball and each block is
/// rescaled to its new norm; blocks thresholded to zero become zero.
inline Vector project_mixed_l1_ball(const Eigen::Ref<const Vector>& x, const BlockPartition& partition,
                                    double radius) {
  if (!(radius > 0.0)) throw ArgumentError("project_mixed_l1_ball: radius must be positive");
  const Vector r = block_norms(x, partition);
  Vector out = x;
  if (r.sum() <= radius) return out;
  const double theta = simplex_threshold(r, radius);
  const auto n = static_cast<Eigen::Index>(partition.block_len());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double target = r[i] - theta;
    if (target > 0.0) {
      out.segment(i * n, n) *= target / r[i];
    } else {
      out.segment(i * n, n).setZero();
    }
  }
  return out;
}

inline BlockVector project_mixed_l1_ball(const BlockVector& x, double radius) {
  return BlockVector(project_mixed_l1_ball(x.values(), x.partition(), radius), x.partition());
}

/// prox of threshold * ||.||_{2,1}: each block scaled by max(0, 1 - threshold/||b||).
inline Vector block_soft_threshold(const Eigen::Ref<const Vector>& x, const BlockPartition& partition,
                                   double threshold) {
  Vector out = x;
  const auto n = static_cast<Eigen::Index>(partition.block_len());
  const auto p = static_cast<Eigen::Index>(partition.num_blocks());
  for (Eigen::Index i = 0; i < p; ++i) {
    auto b = out.segment(i * n, n);
    const double nrm = b.norm();
    if (nrm <= threshold) {
      b.setZero();
    } else {
      b *= 1.0 - threshold / nrm;
    }
  }
  return out;
}

/// Projection onto {z : ||z - center||_{2,inf} <= radius} (per-block clipping).
inline Vector project_mixed_linf_ball(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                                      const BlockPartition& partition, double radius) {
  Vector d = x - center;
  const auto n = static_cast<Eigen::Index>(partition.block_len());
  const auto p = static_cast<Eigen::Index>(partition.num_blocks());
  for (Eigen::Index i = 0; i < p; ++i) {
    auto b = d.segment(i * n, n);
    const double nrm = b.norm();
    if (nrm > radius) b *= radius / nrm;
  }
  return center + d;
}

/// Projection onto the Euclidean ball {w : ||w - center||_2 <= radius}.
inline Vector project_l2_ball(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                              double radius) {
  Vector d = x - center;
  const double nrm = d.norm();
  if (nrm > radius) {
    if (radius > 0.0) {
      d *= radius / nrm;
    } else {
      d.setZero();
    }
  }
  return center + d;
}

}  // namespace bcmsv
