#pragma once

// Block basis pursuit (BBP), block Dantzig selector (BDS) and group lasso.
//
// BBP and BDS are solved with the primal-dual hybrid gradient method of
// Chambolle and Pock applied to min ||x||_{2,1} + g(Kx), with K = A and g the
// indicator of the residual ball (BBP), or K = A^T A and g the indicator of
// the correlation box around A^T y (BDS). Iterates are certified by a duality
// gap evaluated at a feasible primal point, obtained by moving the current
// iterate toward the affine point x_aff = x - A^+(Ax - y) just far enough to
// satisfy the constraint. The group lasso is solved by FISTA with restart.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "bcmsv/block_core.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/linalg.hpp"
#include "bcmsv/prox.hpp"

namespace bcmsv {

enum class Program { BBP, BDS, GroupLasso };

inline std::string program_name(Program p) {
  switch (p) {
    case Program::BBP: return "bbp";
    case Program::BDS: return "bds";
    case Program::GroupLasso: return "group-lasso";
  }
  return "?";
}

inline Program parse_program(const std::string& s) {
  if (s == "bbp") return Program::BBP;
  if (s == "bds") return Program::BDS;
  if (s == "group-lasso" || s == "lasso" || s == "group_lasso") return Program::GroupLasso;
  throw ArgumentError("unknown program '" + s + "' (expected bbp, bds or group-lasso)");
}

struct RecoveryProblem {
  Matrix A;
  Vector y;
  BlockPartition partition;
  Program program = Program::BBP;
  /// zeta for BBP, mu for BDS and the group lasso.
  double noise_level = 0.0;

  void validate() const {
    if (y.size() != A.rows()) throw ArgumentError("RecoveryProblem: y length must equal rows of A");
    if (static_cast<std::size_t>(A.cols()) != partition.total_len()) {
      throw ArgumentError("RecoveryProblem: partition does not match columns of A");
    }
    if (!(noise_level >= 0.0)) throw ArgumentError("RecoveryProblem: noise level must be >= 0");
    if (program == Program::GroupLasso && !(noise_level > 0.0)) {
      throw ArgumentError("RecoveryProblem: group lasso needs mu > 0");
    }
  }
};

struct RecoveryOptions {
  double tol = 1e-8;
  int max_iters = 50000;
  /// Throw ConvergenceError when the iteration cap is hit.
  bool throw_on_nonconvergence = true;
};

struct RecoveryResult {
  Vector x_hat;
  double objective = 0.0;
  /// Constraint violation (BBP, BDS) or excess of ||A^T(y - Ax)||_{2,inf} over mu.
  double primal_feasibility = 0.0;
  /// Relative duality gap (BBP, BDS) or scaled gradient-mapping norm (lasso).
  double optimality_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  Program program = Program::BBP;
};

namespace detail {

/// A^+ applied through a complete orthogonal decomposition.
class PseudoInverse {
 public:
  explicit PseudoInverse(const Matrix& a) : cod_(a) {}
  Vector apply(const Vector& b) const { return cod_.solve(b); }

 private:
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
};

inline double l21(const Vector& x, const BlockPartition& part) { return mixed_norm(x, part, QParam::one()); }
inline double l2inf(const Vector& x, const BlockPartition& part) {
  return mixed_norm(x, part, QParam::infinity());
}

/// Smallest theta in [0, 1] with ||r0 + theta (r1 - r0)|| <= radius, given
/// ||r1|| <= radius.
inline double ball_entry(const Vector& r0, const Vector& r1, double radius) {
  const double n0 = r0.squaredNorm();
  if (n0 <= radius * radius) return 0.0;
  const Vector d = r1 - r0;
  const double a = d.squaredNorm();
  if (a == 0.0) return 1.0;
  const double b = 2.0 * r0.dot(d);
  const double c = n0 - radius * radius;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  // c > 0, so the relevant root is the smaller one; written to avoid cancellation
  const double q = -0.5 * (b - std::sqrt(disc));
  const double theta = q != 0.0 ? c / q : 1.0;
  return std::clamp(theta, 0.0, 1.0);
}

inline void nonconvergence(const RecoveryOptions& opt, const RecoveryResult& r, const char* who) {
  if (!opt.throw_on_nonconvergence) return;
  std::ostringstream d;
  d << "iterations=" << r.iterations << " objective=" << r.objective << " feasibility=" << r.primal_feasibility
    << " optimality=" << r.optimality_residual;
  throw ConvergenceError(std::string(who) + ": iteration cap reached", d.str());
}

struct GapPoint {
  Vector x_feasible;
  double objective = 0.0;
  double relative_gap = kInf;
  double feasibility = 0.0;
};

/// Restarted PDHG for min ||x||_{2,1} + g(Kx), ||K|| <= 1/eta * 0.99.
///
/// `step(x, xi, tau, sigma)` performs one primal-dual update in place and
/// `evaluate(x, xi)` turns a primal-dual pair into a feasible point and a
/// relative duality gap. Every 10 iterations the better of the current and
/// the averaged iterate is scored; the method restarts from it on sufficient
/// decay of the gap, and the primal weight omega (tau = eta/omega,
/// sigma = eta*omega) is re-estimated from the distance travelled.
template <class Step, class Evaluate>
RecoveryResult restarted_pdhg(Eigen::Index nx, Eigen::Index nd, double eta, const RecoveryOptions& opt,
                              RecoveryResult res, const char* who, Step step, Evaluate evaluate) {
  double omega = 1.0;
  Vector x = Vector::Zero(nx), xi = Vector::Zero(nd);
  Vector x_sum = x, xi_sum = xi, x_anchor = x, xi_anchor = xi;
  int count = 0, since = 0;
  double gap_anchor = kInf, gap_prev = kInf;
  double xi_ref = 0.0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    step(x, xi, eta / omega, eta * omega);
    x_sum += x;
    xi_sum += xi;
    ++count;
    ++since;
    res.iterations = it;
    if (xi_ref == 0.0) xi_ref = std::max(xi.norm(), 1e-300);
    if (xi.norm() > 1e6 * std::max(1.0, xi_ref)) {
      throw InfeasibleError(std::string(who) + ": dual iterates diverge");
    }
    if (it % 10 != 0 && it != opt.max_iters) continue;
    const Vector x_avg = x_sum / count;
    const Vector xi_avg = xi_sum / count;
    GapPoint cur = evaluate(x, xi);
    GapPoint avg = evaluate(x_avg, xi_avg);
    const bool use_avg = avg.relative_gap < cur.relative_gap;
    GapPoint& best = use_avg ? avg : cur;
    res.x_hat = best.x_feasible;
    res.objective = best.objective;
    res.optimality_residual = best.relative_gap;
    res.primal_feasibility = best.feasibility;
    if (best.relative_gap <= opt.tol) {
      res.converged = true;
      return res;
    }
    const double g = best.relative_gap;
    const bool restart =
        g <= 0.2 * gap_anchor || (g <= 0.8 * gap_anchor && g > gap_prev) || since >= 0.36 * it;
    gap_prev = g;
    if (!restart) continue;
    if (use_avg) {
      x = x_avg;
      xi = xi_avg;
    }
    const double dx = (x - x_anchor).norm();
    const double dxi = (xi - xi_anchor).norm();
    if (dx > 1e-12 && dxi > 1e-12) omega = std::sqrt(omega * dxi / dx);
    x_anchor = x;
    xi_anchor = xi;
    x_sum.setZero();
    xi_sum.setZero();
    count = 0;
    since = 0;
    gap_anchor = g;
    gap_prev = kInf;
  }
  nonconvergence(opt, res, who);
  return res;
}

}  // namespace detail

/// min ||z||_{2,1} s.t. ||y - Az||_2 <= zeta.
inline RecoveryResult solve_bbp(const RecoveryProblem& prob, const RecoveryOptions& opt = {}) {
  prob.validate();
  const Matrix& A = prob.A;
  const BlockPartition& part = prob.partition;
  const double zeta = prob.noise_level;
  detail::PseudoInverse pinv(A);
  const Vector x_ls = pinv.apply(prob.y);
  const double dist = (prob.y - A * x_ls).norm();
  const double ynorm = prob.y.norm();
  if (dist > zeta + 1e-10 * std::max(1.0, ynorm)) {
    throw InfeasibleError("solve_bbp: distance from y to range(A) is " + std::to_string(dist) +
                          " > zeta = " + std::to_string(zeta));
  }
  // the constraint is measured against the reachable part of the ball
  const double radius = std::max(zeta, dist);

  RecoveryResult res;
  res.program = Program::BBP;
  if (ynorm <= radius) {
    res.x_hat = Vector::Zero(A.cols());
    res.primal_feasibility = 0.0;
    res.converged = true;
    return res;
  }

  auto feasible_point = [&](const Vector& z) -> Vector {
    const Vector x_aff = z - pinv.apply(A * z - prob.y);
    const Vector r0 = prob.y - A * z;
    const Vector r1 = prob.y - A * x_aff;
    const double theta = zeta == 0.0 ? 1.0 : detail::ball_entry(r0, r1, radius);
    return (1.0 - theta) * z + theta * x_aff;
  };
  auto dual_value = [&](const Vector& dual) {
    const double scale = std::max(1.0, detail::l2inf(A.transpose() * dual, part));
    const Vector d = dual / scale;
    return -d.dot(prob.y) - zeta * d.norm();
  };
  auto step = [&](Vector& x, Vector& xi, double tau, double sigma) {
    const Vector x_new = block_soft_threshold(x - tau * (A.transpose() * xi), part, tau);
    const Vector w = xi + sigma * (A * (2.0 * x_new - x));
    xi = w - sigma * project_l2_ball(w / sigma, prob.y, zeta);
    x = x_new;
  };
  auto evaluate = [&](const Vector& x, const Vector& xi) {
    detail::GapPoint g;
    g.x_feasible = feasible_point(x);
    g.objective = detail::l21(g.x_feasible, part);
    g.relative_gap = (g.objective - dual_value(xi)) / (1.0 + std::abs(g.objective));
    g.feasibility = std::max(0.0, (prob.y - A * g.x_feasible).norm() - zeta);
    return g;
  };
  return detail::restarted_pdhg(A.cols(), A.rows(), 0.99 / spectral_norm(A), opt, res, "solve_bbp", step, evaluate);
}

/// min ||z||_{2,1} s.t. ||A^T(y - Az)||_{2,inf} <= mu.
inline RecoveryResult solve_bds(const RecoveryProblem& prob, const RecoveryOptions& opt = {}) {
  prob.validate();
  const Matrix& A = prob.A;
  const BlockPartition& part = prob.partition;
  const double mu = prob.noise_level;
  const Matrix G = A.transpose() * A;
  const Vector c = A.transpose() * prob.y;
  detail::PseudoInverse pinv(A);

  RecoveryResult res;
  res.program = Program::BDS;
  if (detail::l2inf(c, part) <= mu) {
    res.x_hat = Vector::Zero(A.cols());
    res.converged = true;
    return res;
  }

  auto violation = [&](const Vector& z) { return detail::l2inf(c - G * z, part); };
  auto feasible_point = [&](const Vector& z) -> Vector {
    const double viol = violation(z);
    if (viol <= mu) return z;
    // along the segment to x_aff every block of the correlation shrinks by (1 - theta)
    const Vector x_aff = z - pinv.apply(A * z - prob.y);
    const double theta = 1.0 - mu / viol;
    return (1.0 - theta) * z + theta * x_aff;
  };
  auto dual_value = [&](const Vector& dual) {
    const double scale = std::max(1.0, detail::l2inf(G * dual, part));
    const Vector d = dual / scale;
    return -d.dot(c) - mu * detail::l21(d, part);
  };
  auto step = [&](Vector& x, Vector& xi, double tau, double sigma) {
    const Vector x_new = block_soft_threshold(x - tau * (G * xi), part, tau);
    const Vector w = xi + sigma * (G * (2.0 * x_new - x));
    xi = w - sigma * project_mixed_linf_ball(w / sigma, c, part, mu);
    x = x_new;
  };
  auto evaluate = [&](const Vector& x, const Vector& xi) {
    detail::GapPoint g;
    g.x_feasible = feasible_point(x);
    g.objective = detail::l21(g.x_feasible, part);
    g.relative_gap = (g.objective - dual_value(xi)) / (1.0 + std::abs(g.objective));
    g.feasibility = std::max(0.0, violation(g.x_feasible) - mu);
    return g;
  };
  const double an = spectral_norm(A);
  return detail::restarted_pdhg(A.cols(), A.cols(), 0.99 / (an * an), opt, res, "solve_bds", step, evaluate);
}

/// min 0.5 ||y - Az||^2 + mu ||z||_{2,1} by FISTA with function-value restart.
inline RecoveryResult solve_group_lasso(const RecoveryProblem& prob, const RecoveryOptions& opt = {}) {
  prob.validate();
  const Matrix& A = prob.A;
  const BlockPartition& part = prob.partition;
  const double mu = prob.noise_level;
  const Vector c = A.transpose() * prob.y;
  const double an = spectral_norm(A);
  const double eta = 1.0 / std::max(an * an, 1e-300);
  const double scale = std::max(1.0, c.norm());

  auto objective = [&](const Vector& z) {
    return 0.5 * (prob.y - A * z).squaredNorm() + mu * detail::l21(z, part);
  };
  auto grad = [&](const Vector& z) -> Vector { return A.transpose() * (A * z) - c; };
  auto step = [&](const Vector& z) -> Vector { return block_soft_threshold(z - eta * grad(z), part, eta * mu); };

  RecoveryResult res;
  res.program = Program::GroupLasso;
  Vector x = Vector::Zero(A.cols());
  Vector v = x;
  double t = 1.0;
  double fx = objective(x);
  for (int it = 1; it <= opt.max_iters; ++it) {
    Vector x_new = step(v);
    double f_new = objective(x_new);
    if (f_new > fx) {
      // restart the momentum and take a plain proximal step from x
      t = 1.0;
      x_new = step(x);
      f_new = objective(x_new);
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = std::move(x_new);
    fx = f_new;
    t = t_new;
    res.iterations = it;
    const double mapping = (x - step(x)).norm() / eta;
    if (mapping <= opt.tol * scale) {
      res.converged = true;
      res.optimality_residual = mapping / scale;
      break;
    }
    res.optimality_residual = mapping / scale;
  }
  res.x_hat = x;
  res.objective = fx;
  res.primal_feasibility = std::max(0.0, detail::l2inf(c - A.transpose() * (A * x), part) - mu);
  if (!res.converged) detail::nonconvergence(opt, res, "solve_group_lasso");
  return res;
}

inline RecoveryResult solve(const RecoveryProblem& prob, const RecoveryOptions& opt = {}) {
  switch (prob.program) {
    case Program::BBP: return solve_bbp(prob, opt);
    case Program::BDS: return solve_bds(prob, opt);
    case Program::GroupLasso: return solve_group_lasso(prob, opt);
  }
  throw ArgumentError("solve: unknown program");
}

// ---------------------------------------------------------------------------
// Residual cone membership

struct ConeReport {
  double kq_of_h = 0.0;
  double cone_bound = 0.0;
  /// ||h||_{2,1} against 2k^{1-1/q}||h||_{2,q} (+ the sparsity-defect term)
  double l1_norm = 0.0;
  double l1_bound = 0.0;
  bool inside = true;
};

/// Cone constant c with ||h_{S^c}|| bounded through ||h||_{2,1} <= c k^{1-1/q} ||h||_{2,q}.
inline double cone_factor(Program program, double kappa) {
  if (program != Program::GroupLasso) return 2.0;
  if (!(kappa > 0.0 && kappa < 1.0)) throw ArgumentError("cone_factor: kappa must lie in (0, 1)");
  return 2.0 / (1.0 - kappa);
}

inline double cone_exponent_power(double base, double q) {
  return std::isinf(q) ? base : std::pow(base, q / (q - 1.0));
}

/// k_q(h) <= c^{q/(q-1)} k for a block k-sparse truth; c = 2 for BBP and
/// BDS, 2/(1 - kappa) for the group lasso. Tested in the equivalent form
/// ||h||_{2,1} <= c k^{1-1/q} ||h||_{2,q}. Residuals below
/// zero_tol * max(1, ||x||_{2,q}) count as exact recovery, since the cone
/// only holds up to the solver's optimality tolerance.
inline ConeReport residual_cone_check(const Vector& x_true, const Vector& x_hat, const BlockPartition& part,
                                      std::size_t k, double q, Program program, double kappa = 0.5,
                                      double rel_tol = 1e-6, double zero_tol = 1e-6) {
  ConeReport r;
  const double c = cone_factor(program, kappa);
  r.cone_bound = cone_exponent_power(c, q) * static_cast<double>(k);
  const Vector h = x_hat - x_true;
  const QParam qp = QParam::from_value(q);
  const double hq = mixed_norm(h, part, qp);
  r.l1_norm = mixed_norm(h, part, QParam::one());
  r.l1_bound = c * std::pow(static_cast<double>(k), 1.0 - (std::isinf(q) ? 0.0 : 1.0 / q)) * hq;
  if (hq == 0.0) return r;
  r.kq_of_h = q_ratio_block_sparsity(h, part, qp);
  if (hq <= zero_tol * std::max(1.0, mixed_norm(x_true, part, qp))) return r;
  r.inside = r.l1_norm <= r.l1_bound * (1.0 + rel_tol);
  return r;
}

/// Compressible truth: ||h||_{2,1} <= c (k^{1-1/q}||h||_{2,q} + phi_k(x)).
inline ConeReport compressible_cone_check(const Vector& x_true, const Vector& x_hat, const BlockPartition& part,
                                          std::size_t k, double q, Program program, double kappa = 0.5,
                                          double rel_tol = 1e-6, double zero_tol = 1e-6) {
  ConeReport r;
  const double c = cone_factor(program, kappa);
  const Vector h = x_hat - x_true;
  const QParam qp = QParam::from_value(q);
  const double hq = mixed_norm(h, part, qp);
  const double phi = best_block_k_approx_error(BlockVector(x_true, part), k);
  r.l1_norm = mixed_norm(h, part, QParam::one());
  r.l1_bound = c * (std::pow(static_cast<double>(k), 1.0 - (std::isinf(q) ? 0.0 : 1.0 / q)) * hq + phi);
  r.cone_bound = cone_exponent_power(c, q) * static_cast<double>(k);
  if (hq == 0.0) return r;
  r.kq_of_h = q_ratio_block_sparsity(h, part, qp);
  if (hq <= zero_tol * std::max(1.0, mixed_norm(x_true, part, qp))) return r;
  r.inside = r.l1_norm <= r.l1_bound * (1.0 + rel_tol);
  return r;
}

}  // namespace bcmsv
