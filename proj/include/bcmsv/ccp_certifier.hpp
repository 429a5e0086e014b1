#pragma once

// Sparsity certificate for noise-free block basis pursuit.
//
// Every block k-sparse signal is the unique BBP solution when
//   k < min_{z in ker A \ 0} 2^{q/(1-q)} k_q(z).
// Since k_q(z) = (||z||_{2,1} / ||z||_{2,q})^{q/(q-1)}, the minimum is reached
// by maximizing V = ||z||_{2,q} over ker A intersected with the unit l2/l1
// ball. That maximization is non-convex; the convex-concave procedure
// linearizes the norm at the current iterate and maximizes the linear model
// over the same convex set, which can only increase the norm.
//
// CCP is a local method, so V is a lower estimate of the true maximum and the
// resulting k_max is heuristic in the optimistic direction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "bcmsv/bcmsv_estimator.hpp"
#include "bcmsv/block_core.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/linalg.hpp"
#include "bcmsv/prox.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

struct CcpConfig {
  double q = 2.0;
  int max_outer_iters = 200;
  double objective_stall_tol = 1e-8;
  /// Relative duality gap at which an inner linear maximization stops.
  double inner_tol = 1e-9;
  int inner_max_iters = 20000;
  int num_initializations = 10;
  std::uint64_t seed = 20190101;

  void validate() const {
    if (!(q > 1.0)) throw ArgumentError("CcpConfig: q must be > 1");
    if (!(objective_stall_tol > 0.0) || !(inner_tol > 0.0)) {
      throw ArgumentError("CcpConfig: tolerances must be positive");
    }
    if (max_outer_iters < 1 || inner_max_iters < 1 || num_initializations < 1) {
      throw ArgumentError("CcpConfig: iteration counts must be >= 1");
    }
  }
};

struct SparsityCertificate {
  std::size_t k_max = 0;
  double optimal_value = 0.0;
  /// 2^{q/(1-q)} V^{-q/(q-1)}; +inf for a trivial kernel.
  double threshold = kInf;
  std::size_t kernel_dim = 0;
  bool trivial_kernel = false;
  Vector witness;
  int iterations_used = 0;
  int initializations = 0;
  double q = 2.0;
  std::uint64_t seed = 0;
  /// Objective ||z_l||_{2,q} after every accepted outer iteration, per start.
  std::vector<std::vector<double>> trajectories;
  /// Worst ||A z_l||_2 and ||z_l||_{2,1} over every iterate of every start.
  double max_kernel_residual = 0.0;
  double max_l21 = 0.0;
};

/// Largest integer strictly below the recovery threshold for a kernel vector
/// with ||z||_{2,q} / ||z||_{2,1} = v, clamped to [0, p].
inline double ccp_threshold(double v, double q) {
  if (!(v > 0.0)) return kInf;
  if (std::isinf(q)) return 0.5 / v;
  return std::pow(2.0, q / (1.0 - q)) * std::pow(v, -q / (q - 1.0));
}

inline std::size_t k_max_from_threshold(double threshold, std::size_t p) {
  if (!std::isfinite(threshold)) return p;
  const double k = std::ceil(threshold) - 1.0;
  if (k <= 0.0) return 0;
  return std::min(p, static_cast<std::size_t>(k));
}

struct InnerResult {
  Vector z;
  double value = 0.0;
  double upper_bound = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Iteration cap reached with neither stopping rule met.
  bool exhausted = false;
};

/// Warm-startable ADMM for max <c, z> over {z in ker A : ||z||_{2,1} <= radius}.
///
/// Splitting x = v with x in the ball and v in the kernel. Any lambda in
/// range(A^T) gives the dual bound radius * ||P_K c - lambda||_{2,inf}, and the
/// kernel projection of x, pulled back into the ball, gives a feasible lower
/// bound; the loop stops when the two agree to `tol` relatively. With a finite
/// `baseline` (the model value at the current CCP iterate) it also stops once
/// the feasible point has gained half of the largest possible improvement.
class CcpInnerSolver {
 public:
  CcpInnerSolver(const Matrix& a, const BlockPartition& part)
      : part_(part), split_(nullspace_split(a)), proj_(split_) {}

  const NullspaceSplit& split() const { return split_; }
  Vector project_kernel(const Vector& x) const { return proj_(x); }

  /// Kernel projection followed by scaling into the ball.
  Vector make_feasible(const Vector& x, double radius) const {
    Vector z = proj_(x);
    const double l1 = mixed_norm(z, part_, QParam::one());
    if (l1 > radius) z *= radius / l1;
    return z;
  }

  void reset() { warm_ = false; }

  InnerResult solve(const Vector& c_in, double radius, double tol, int max_iters, double baseline = -kInf) {
    constexpr double kRelax = 1.6;
    InnerResult out;
    const Eigen::Index N = c_in.size();
    const Vector c = proj_(c_in);
    const double cn = c.norm();
    if (cn <= 1e-14 * std::max(1.0, c_in.norm())) {
      out.z = Vector::Zero(N);
      out.converged = true;
      return out;
    }
    if (!warm_ || x_.size() != N) {
      x_ = Vector::Zero(N);
      v_ = Vector::Zero(N);
      u_ = Vector::Zero(N);
      rho_ = cn / radius;
      warm_ = true;
    }
    const auto bound = [&](const Vector& lam) {
      // lam is projected onto range(A^T) so the bound is valid
      const Vector range_part = lam - proj_(lam);
      return radius * mixed_norm(c - range_part, part_, QParam::infinity());
    };
    double best_lower = -kInf;
    double best_upper = kInf;
    for (int it = 1; it <= max_iters; ++it) {
      x_ = project_mixed_l1_ball(Vector(v_ - u_ + c / rho_), part_, radius);
      const Vector v_old = v_;
      const Vector xr = kRelax * x_ + (1.0 - kRelax) * v_;
      v_ = proj_(xr + u_);
      u_ += xr - v_;
      out.iterations = it;
      if (it % 10 == 0 || it == max_iters) {
        const Vector z = make_feasible(x_, radius);
        const double lower = c.dot(z);
        if (lower > best_lower) {
          best_lower = lower;
          out.z = z;
        }
        best_upper = std::min(best_upper, bound(rho_ * u_));
        if (best_upper - best_lower <= tol * std::max(1e-300, std::abs(best_upper))) {
          out.converged = true;
          break;
        }
        if (std::isfinite(baseline) && best_lower - baseline >= 0.5 * (best_upper - baseline)) break;
        if (it >= max_iters) out.exhausted = true;
        // residual balancing
        const double r = (x_ - v_).norm();
        const double s = rho_ * (v_ - v_old).norm();
        if (r > 10.0 * s) {
          rho_ *= 2.0;
          u_ /= 2.0;
        } else if (s > 10.0 * r) {
          rho_ /= 2.0;
          u_ *= 2.0;
        }
      }
    }
    out.value = best_lower;
    out.upper_bound = best_upper;
    return out;
  }

 private:
  BlockPartition part_;
  NullspaceSplit split_;
  KernelProjector proj_;
  bool warm_ = false;
  Vector x_, v_, u_;
  double rho_ = 1.0;
};

/// Maximizer of <c, z> over {Az = 0, ||z||_{2,1} <= radius}; zero when c is
/// orthogonal to the kernel.
inline Vector ccp_inner_maximize(const Vector& c, const Matrix& a, const BlockPartition& part,
                                 double radius = 1.0, double tol = 1e-9, int max_iters = 50000) {
  if (!(radius > 0.0)) throw ArgumentError("ccp_inner_maximize: radius must be positive");
  if (c.size() != a.cols()) throw ArgumentError("ccp_inner_maximize: size mismatch");
  CcpInnerSolver solver(a, part);
  if (solver.split().kernel.cols() == 0) return Vector::Zero(c.size());
  auto res = solver.solve(c, radius, tol, max_iters);
  if (!res.converged) {
    std::ostringstream d;
    d << "lower=" << res.value << " upper=" << res.upper_bound << " iterations=" << res.iterations;
    throw ConvergenceError("ccp_inner_maximize: duality gap not closed", d.str());
  }
  return res.z;
}

namespace detail {

inline Vector ccp_gradient(const Vector& z, const BlockPartition& part, double q) {
  if (!std::isinf(q)) return mixed_norm_gradient(z, part, q, mixed_norm(z, part, QParam::from_value(q)));
  Vector g = Vector::Zero(z.size());
  const Vector r = block_norms(z, part);
  Eigen::Index j = 0;
  if (r.maxCoeff(&j) <= 0.0) return g;
  const auto n = static_cast<Eigen::Index>(part.block_len());
  g.segment(j * n, n) = z.segment(j * n, n) / r[j];
  return g;
}

}  // namespace detail

inline SparsityCertificate certify_max_sparsity(const Matrix& a, const BlockPartition& part,
                                                const CcpConfig& config = {}) {
  config.validate();
  if (static_cast<std::size_t>(a.cols()) != part.total_len()) {
    throw ArgumentError("certify_max_sparsity: partition does not match matrix columns");
  }
  const QParam qp = QParam::from_value(config.q);
  SparsityCertificate cert;
  cert.q = config.q;
  cert.seed = config.seed;
  cert.initializations = config.num_initializations;

  CcpInnerSolver inner(a, part);
  const Eigen::Index d = inner.split().kernel.cols();
  cert.kernel_dim = static_cast<std::size_t>(d);
  if (d == 0) {
    cert.trivial_kernel = true;
    cert.k_max = part.num_blocks();
    cert.witness = Vector::Zero(a.cols());
    return cert;
  }

  double best = -1.0;
  for (int init = 0; init < config.num_initializations; ++init) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(init)));
    Vector w(d);
    for (auto& e : w) e = rng.normal();
    Vector z = inner.split().kernel * w;
    z /= mixed_norm(z, part, QParam::one());
    double obj = mixed_norm(z, part, qp);
    std::vector<double> traj{obj};
    auto record = [&](const Vector& v) {
      cert.max_kernel_residual = std::max(cert.max_kernel_residual, (a * v).norm());
      cert.max_l21 = std::max(cert.max_l21, mixed_norm(v, part, QParam::one()));
    };
    record(z);
    inner.reset();
    for (int it = 0; it < config.max_outer_iters; ++it) {
      const Vector g = detail::ccp_gradient(z, part, config.q);
      InnerResult res = inner.solve(g, 1.0, config.inner_tol, config.inner_max_iters, obj);
      ++cert.iterations_used;
      if (res.z.size() == 0) break;
      // the model cannot rise by more than the stall tolerance: stationary
      if (res.upper_bound - obj < config.objective_stall_tol) break;
      const double next = mixed_norm(res.z, part, qp);
      if (res.exhausted && !(next > obj)) {
        // a stuck inner solve whose bound leaves almost no room is a stationary point
        if (res.upper_bound - obj <= 1e-4 * obj) break;
        std::ostringstream dump;
        dump << "init=" << init << " outer=" << it << " objective=" << obj << " lower=" << res.value
             << " upper=" << res.upper_bound << "\nz=" << z.transpose();
        throw ConvergenceError("certify_max_sparsity: inner maximization made no progress", dump.str());
      }
      // ascent guard: the linear model must improve and so must the norm
      if (!(g.dot(res.z) > obj) || !(next > obj)) break;
      const double gain = next - obj;
      z = std::move(res.z);
      obj = next;
      traj.push_back(obj);
      record(z);
      if (gain < config.objective_stall_tol) break;
    }
    cert.trajectories.push_back(std::move(traj));
    const double v = obj / mixed_norm(z, part, QParam::one());
    if (v > best) {
      best = v;
      cert.witness = z;
      cert.optimal_value = obj;
    }
  }
  cert.threshold = ccp_threshold(best, config.q);
  cert.k_max = k_max_from_threshold(cert.threshold, part.num_blocks());
  return cert;
}

}  // namespace bcmsv
