#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "bcmsv/block_core.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

/// Largest singular value of `a` by power iteration on A^T A, stopped at
/// relative change `rel_tol`. The start vector is fixed, so the result is
/// deterministic and scales exactly with `a`.
inline double spectral_norm(const Eigen::Ref<const Matrix>& a, double rel_tol = 1e-10, int max_iters = 10000) {
  if (a.size() == 0) return 0.0;
  Rng rng(0x5eed);
  Vector v(a.cols());
  for (auto& e : v) e = rng.normal();
  v.normalize();
  double prev = 0.0;
  double sigma2 = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = a.transpose() * (a * v);
    sigma2 = w.norm();
    if (sigma2 == 0.0) return 0.0;
    v = w / sigma2;
    if (std::abs(sigma2 - prev) <= rel_tol * sigma2) break;
    prev = sigma2;
  }
  return std::sqrt(sigma2);
}

/// Orthonormal bases of ker(A) and of its complement range(A^T), from a
/// column-pivoted QR of A^T with rank threshold rel_tol * (largest |R_ii|).
struct NullspaceSplit {
  Matrix kernel;  // N x d
  Matrix range;   // N x r
  Eigen::Index rank = 0;
};

inline NullspaceSplit nullspace_split(const Eigen::Ref<const Matrix>& a, double rel_tol = 1e-10) {
  const Eigen::Index N = a.cols();
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(rel_tol);
  const Eigen::Index r = std::min<Eigen::Index>(qr.rank(), N);
  Matrix q = qr.householderQ() * Matrix::Identity(N, N);
  return {q.rightCols(N - r), q.leftCols(r), r};
}

/// Orthogonal projector onto ker(A) applied through whichever basis is
/// smaller.
class KernelProjector {
 public:
  explicit KernelProjector(const NullspaceSplit& split)
      : use_kernel_(split.kernel.cols() <= split.range.cols()),
        basis_(use_kernel_ ? split.kernel : split.range) {}

  Vector operator()(const Eigen::Ref<const Vector>& x) const {
    if (use_kernel_) return basis_ * (basis_.transpose() * x);
    return x - basis_ * (basis_.transpose() * x);
  }

 private:
  bool use_kernel_;
  Matrix basis_;
};

}  // namespace bcmsv
