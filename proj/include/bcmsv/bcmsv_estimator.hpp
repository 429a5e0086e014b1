#pragma once

// Estimation of the q-ratio block constrained minimal singular value
//
//   beta_{q,s}(A) = min { ||Az||_2 / ||z||_{2,q} : z != 0, k_q(z) <= s }.
//
// By homogeneity this is min ||Az||_2 subject to ||z||_{2,q} = 1 and
// ||z||_{2,1} <= s^{(q-1)/q}. The second constraint is a convex mixed l2/l1
// ball with a closed-form projection; the first is handled by an augmented
// Lagrangian whose subproblems are solved by spectral projected gradient
// onto the ball. The problem is non-convex, so the solver is restarted from
// independent random points and the smallest feasible value is kept. Every
// reported value is attained by a feasible point and is therefore an upper
// bound on beta (up to the feasibility tolerance).
//
// For q = inf the equality ||z||_{2,inf} = 1 is imposed on the currently
// largest block j while the other blocks are held inside the unit ball; j is
// re-selected before every multiplier update.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bcmsv/block_core.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/linalg.hpp"
#include "bcmsv/prox.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

struct BcmsvProblem {
  Matrix A;
  BlockPartition partition;
  double q;  // in (1, inf]
  double s;  // in [1, p]

  void validate() const {
    if (static_cast<std::size_t>(A.cols()) != partition.total_len()) {
      throw ArgumentError("BcmsvProblem: partition N does not match matrix columns");
    }
    if (!(q > 1.0)) throw ArgumentError("BcmsvProblem: q must be > 1");
    const double p = static_cast<double>(partition.num_blocks());
    if (!(s >= 1.0 && s <= p)) {
      throw ArgumentError("BcmsvProblem: s must lie in [1, p]");
    }
  }

  /// Radius of the l2/l1 constraint at unit l2/lq norm.
  double l1_radius() const { return std::isinf(q) ? s : std::pow(s, (q - 1.0) / q); }
};

struct BcmsvOptions {
  int restarts = 40;
  /// Stationarity tolerance on the scaled projected-gradient residual. The
  /// objective error at a residual r is O(r^2), so 1e-6 already pins the value
  /// to ~1e-12; residuals much below sqrt(eps) are not reachable with a
  /// value-based line search.
  double tol = 1e-6;
  /// Cap on projected-gradient iterations per augmented-Lagrangian subproblem.
  int max_iters = 5000;
  int max_outer_iters = 40;
  std::uint64_t seed = 20190101;
  int jobs = 1;
  /// Feasibility tolerances used to accept a restart.
  double equality_tol = 1e-6;
  double ball_tol = 1e-6;
};

struct BcmsvEstimate {
  double value = 0.0;
  std::vector<double> per_restart_values;
  int restarts = 0;
  std::vector<double> kkt_residuals;
  std::vector<bool> converged_flags;
  std::vector<bool> feasible_flags;
  std::size_t best_restart = 0;
  Vector witness;
  std::uint64_t seed = 0;
  double elapsed_seconds = 0.0;
};

namespace detail {

/// Gradient of z -> ||z||_{2,q} for finite q > 1; zero blocks get zero.
inline Vector mixed_norm_gradient(const Vector& z, const BlockPartition& part, double q, double norm_q) {
  Vector g = Vector::Zero(z.size());
  if (norm_q == 0.0) return g;
  const auto n = static_cast<Eigen::Index>(part.block_len());
  const auto p = static_cast<Eigen::Index>(part.num_blocks());
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto b = z.segment(i * n, n);
    const double r = b.norm();
    if (r > 0.0) g.segment(i * n, n) = std::pow(r / norm_q, q - 1.0) / r * b;
  }
  return g;
}

/// Projection of a non-negative norm vector onto
/// { rho >= 0 : sum(rho) <= radius, rho_i <= cap_i }, caps may be +inf.
inline Vector project_capped_norms(const Vector& r, const Vector& cap, double radius) {
  auto at = [&](double theta) {
    Vector out(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) out[i] = std::clamp(r[i] - theta, 0.0, cap[i]);
    return out;
  };
  Vector base = at(0.0);
  if (base.sum() <= radius) return base;
  std::vector<double> breaks{0.0};
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    breaks.push_back(r[i]);
    if (std::isfinite(cap[i]) && r[i] - cap[i] > 0.0) breaks.push_back(r[i] - cap[i]);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double lo = 0.0;
  double sum_lo = base.sum();
  for (double b : breaks) {
    if (b <= lo) continue;
    const double sum_b = at(b).sum();
    if (sum_b <= radius) {
      // sum is linear on [lo, b]
      const double theta = lo + (sum_lo - radius) * (b - lo) / (sum_lo - sum_b);
      return at(theta);
    }
    lo = b;
    sum_lo = sum_b;
  }
  return at(lo);
}

/// Restart-level solver; one instance per restart.
class BcmsvRestartSolver {
 public:
  BcmsvRestartSolver(const BcmsvProblem& prob, const BcmsvOptions& opt, double a_norm2)
      : prob_(prob),
        opt_(opt),
        part_(prob.partition),
        radius_(prob.l1_radius()),
        infinite_q_(std::isinf(prob.q)),
        scale_(a_norm2 > 0.0 ? a_norm2 : 1.0) {}

  struct Outcome {
    Vector z;
    double value = kInf;
    double kkt_residual = kInf;
    bool feasible = false;
    bool converged = false;
  };

  Outcome run(std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::Index N = static_cast<Eigen::Index>(part_.total_len());
    Vector z(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const double plus = rng.uniform();
      const double minus = rng.uniform();
      z[i] = plus - minus;
    }
    if (z.norm() == 0.0) z[0] = 1.0;
    z = initial_feasible(z);

    double lambda = 0.0;
    double rho = 10.0 * scale_;
    double prev_h = kInf;
    for (int outer = 0; outer < opt_.max_outer_iters; ++outer) {
      if (infinite_q_) select_active_block(z);
      const double residual = minimize_subproblem(z, lambda, rho);
      const double h = constraint(z);
      lambda += rho * h;
      if (std::abs(h) <= kEqualityTarget && residual <= opt_.tol) break;
      if (std::abs(h) > kEqualityTarget && std::abs(h) > 0.25 * std::abs(prev_h)) {
        rho = std::min(rho * 10.0, 1e6 * scale_);
      }
      prev_h = h;
    }
    return finish(std::move(z), lambda);
  }

 private:
  static constexpr double kEqualityTarget = 1e-10;

  double norm_q(const Vector& z) const {
    return infinite_q_ ? mixed_norm(z, part_, QParam::infinity())
                       : mixed_norm(z, part_, QParam::finite(prob_.q));
  }

  auto block(const Vector& z, Eigen::Index i) const {
    const auto n = static_cast<Eigen::Index>(part_.block_len());
    return z.segment(i * n, n);
  }

  double constraint(const Vector& z) const {
    if (infinite_q_) return block(z, active_).norm() - 1.0;
    return norm_q(z) - 1.0;
  }

  Vector constraint_gradient(const Vector& z) const {
    if (!infinite_q_) return mixed_norm_gradient(z, part_, prob_.q, norm_q(z));
    Vector g = Vector::Zero(z.size());
    const auto n = static_cast<Eigen::Index>(part_.block_len());
    const double r = block(z, active_).norm();
    if (r > 0.0) g.segment(active_ * n, n) = block(z, active_) / r;
    return g;
  }

  void select_active_block(const Vector& z) {
    const Vector r = block_norms(z, part_);
    r.maxCoeff(&active_);
  }

  Vector project(const Vector& z) const {
    if (!infinite_q_) return project_mixed_l1_ball(z, part_, radius_);
    const Vector r = block_norms(z, part_);
    Vector cap = Vector::Constant(r.size(), 1.0);
    cap[active_] = kInf;
    const Vector target = project_capped_norms(r, cap, radius_);
    Vector out = z;
    const auto n = static_cast<Eigen::Index>(part_.block_len());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (target[i] > 0.0) {
        out.segment(i * n, n) *= target[i] / r[i];
      } else {
        out.segment(i * n, n).setZero();
      }
    }
    return out;
  }

  Vector initial_feasible(Vector z) {
    for (int k = 0; k < 50; ++k) {
      z /= norm_q(z);
      if (mixed_norm(z, part_, QParam::one()) <= radius_ * (1.0 + 1e-12)) break;
      if (infinite_q_) select_active_block(z);
      z = project(z);
    }
    if (infinite_q_) select_active_block(z);
    return project(z);
  }

  double lagrangian(const Vector& z, double lambda, double rho, double& fval) const {
    fval = (prob_.A * z).squaredNorm();
    const double h = constraint(z);
    return fval + lambda * h + 0.5 * rho * h * h;
  }

  Vector lagrangian_gradient(const Vector& z, double lambda, double rho) const {
    const double h = constraint(z);
    return 2.0 * (prob_.A.transpose() * (prob_.A * z)) + (lambda + rho * h) * constraint_gradient(z);
  }

  /// Scale-free stationarity measure ||P(z - grad/scale) - z||.
  double stationarity(const Vector& z, const Vector& grad) const {
    return (project(z - grad / scale_) - z).norm();
  }

  /// Spectral projected gradient with non-monotone Armijo search. Returns
  /// the final stationarity residual.
  double minimize_subproblem(Vector& z, double lambda, double rho) {
    constexpr int kMemory = 10;
    constexpr double kArmijo = 1e-4;
    const double step_min = 1e-12 / (scale_ + rho);
    const double step_max = 1e12 / (scale_ + rho);
    double fval = 0.0;
    double L = lagrangian(z, lambda, rho, fval);
    Vector grad = lagrangian_gradient(z, lambda, rho);
    std::vector<double> history(kMemory, L);
    const double safe_step = 1.0 / (2.0 * scale_ + rho);
    double step = safe_step;
    double residual = stationarity(z, grad);
    // a spectral step that loses descent to rounding falls back to the safe step
    auto retry = [&] {
      if (step <= safe_step) return false;
      step = safe_step;
      return true;
    };
    for (int it = 0; it < opt_.max_iters && residual > 0.1 * opt_.tol; ++it) {
      const Vector d = project(z - step * grad) - z;
      const double slope = grad.dot(d);
      if (!(slope < 0.0)) {
        if (retry()) continue;
        break;
      }
      const double ref = *std::max_element(history.begin(), history.end());
      double alpha = 1.0;
      Vector trial = z + d;
      double f_trial = 0.0;
      double L_trial = lagrangian(trial, lambda, rho, f_trial);
      int backtracks = 0;
      while (L_trial > ref + kArmijo * alpha * slope && backtracks < 60) {
        alpha *= 0.5;
        trial = z + alpha * d;
        L_trial = lagrangian(trial, lambda, rho, f_trial);
        ++backtracks;
      }
      if (backtracks == 60) {
        if (retry()) continue;
        break;
      }
      Vector grad_new = lagrangian_gradient(trial, lambda, rho);
      const Vector sk = trial - z;
      const Vector yk = grad_new - grad;
      const double sy = sk.dot(yk);
      step = sy > 0.0 ? std::clamp(sk.squaredNorm() / sy, step_min, step_max) : step_max;
      z = std::move(trial);
      grad = std::move(grad_new);
      L = L_trial;
      history[static_cast<std::size_t>(it % kMemory)] = L;
      residual = stationarity(z, grad);
    }
    return residual;
  }

  /// Stationarity minimized over the multiplier, starting from the running
  /// estimate; the augmented-Lagrangian multiplier lags the iterate slightly.
  double kkt_residual(const Vector& z, double lambda) const {
    const Vector gf = 2.0 * (prob_.A.transpose() * (prob_.A * z));
    const Vector gh = constraint_gradient(z);
    auto res = [&](double l) { return stationarity(z, Vector(gf + l * gh)); };
    double best = res(lambda);
    if (best <= opt_.tol) return best;
    // golden-section search on a bracket around the running estimate
    const double w = std::max(std::abs(lambda), scale_);
    double lo = lambda - w, hi = lambda + w;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = res(x1), f2 = res(x2);
    for (int it = 0; it < 100 && hi - lo > 1e-14 * w; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = res(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = res(x2);
      }
    }
    return std::min({best, f1, f2});
  }

  Outcome finish(Vector z, double lambda) {
    Outcome out;
    const double nq = norm_q(z);
    if (!(nq > 0.0) || !z.allFinite()) return out;
    z /= nq;
    if (infinite_q_) select_active_block(z);
    const double ball_excess = mixed_norm(z, part_, QParam::one()) - radius_;
    out.feasible = ball_excess <= opt_.ball_tol && std::abs(norm_q(z) - 1.0) <= opt_.equality_tol;
    out.value = (prob_.A * z).norm();
    out.kkt_residual = kkt_residual(z, lambda);
    out.converged = out.feasible && out.kkt_residual <= opt_.tol;
    out.z = std::move(z);
    return out;
  }

  const BcmsvProblem& prob_;
  const BcmsvOptions& opt_;
  BlockPartition part_;
  double radius_;
  bool infinite_q_;
  double scale_;
  Eigen::Index active_ = 0;
};

}  // namespace detail

/// Multi-start estimate of beta_{q,s}(A). Restart r is seeded with
/// derive_seed(options.seed, r); restarts may run on `options.jobs` threads
/// without changing the result.
inline BcmsvEstimate estimate_bcmsv(const BcmsvProblem& problem, const BcmsvOptions& options = {}) {
  problem.validate();
  if (options.restarts < 1) throw ArgumentError("estimate_bcmsv: restarts must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const double a2 = [&] {
    const double s = spectral_norm(problem.A);
    return s * s;
  }();

  const auto R = static_cast<std::size_t>(options.restarts);
  std::vector<detail::BcmsvRestartSolver::Outcome> outcomes(R);
  auto work = [&](std::size_t first, std::size_t stride) {
    detail::BcmsvRestartSolver solver(problem, options, a2);
    for (std::size_t r = first; r < R; r += stride) outcomes[r] = solver.run(derive_seed(options.seed, r));
  };
  const auto jobs = static_cast<std::size_t>(std::clamp(options.jobs, 1, options.restarts));
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    for (auto& t : pool) t.join();
  }

  BcmsvEstimate est;
  est.restarts = options.restarts;
  est.seed = options.seed;
  double best = kInf;
  bool any = false;
  for (std::size_t r = 0; r < R; ++r) {
    const auto& o = outcomes[r];
    est.per_restart_values.push_back(o.value);
    est.kkt_residuals.push_back(o.kkt_residual);
    est.converged_flags.push_back(o.converged);
    est.feasible_flags.push_back(o.feasible);
    if (o.converged && o.value < best) {
      best = o.value;
      est.best_restart = r;
      any = true;
    }
  }
  if (!any) {
    std::ostringstream diag;
    for (std::size_t r = 0; r < R; ++r) {
      diag << "restart " << r << ": value=" << outcomes[r].value << " kkt=" << outcomes[r].kkt_residual
           << " feasible=" << outcomes[r].feasible << '\n';
    }
    throw ConvergenceError("estimate_bcmsv: no restart converged", diag.str());
  }
  est.value = best;
  est.witness = outcomes[est.best_restart].z;
  est.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

struct Prop2Report {
  double lhs = 0.0;  // beta_{q1,s}
  double mid = 0.0;  // beta_{q2,s^qt}
  double rhs = 0.0;  // s^{-qt} beta_{q1,s^qt}
  double q_tilde = 1.0;
  bool holds = false;
};

/// q~ = q2 (q1 - 1) / (q1 (q2 - 1)), with the q1 = inf limit q2 / (q2 - 1).
inline double prop2_q_tilde(double q1, double q2) {
  if (std::isinf(q1)) return q2 / (q2 - 1.0);
  return q2 * (q1 - 1.0) / (q1 * (q2 - 1.0));
}

/// Checks beta_{q1,s} >= beta_{q2,s^qt} >= s^{-qt} beta_{q1,s^qt} for
/// 1 < q2 <= q1 <= inf and 1 <= s <= p^{1/qt}. Each side is itself a
/// multi-start estimate, so both inequalities are tested with additive slack
/// 1e-3 + allowance.
inline Prop2Report check_prop2_chain(const Matrix& a, const BlockPartition& part, double q1, double q2, double s,
                                     const BcmsvOptions& options = {}, double allowance = 0.0) {
  if (!(q2 > 1.0 && q2 <= q1)) throw ArgumentError("check_prop2_chain: need 1 < q2 <= q1");
  Prop2Report r;
  r.q_tilde = prop2_q_tilde(q1, q2);
  const double p = static_cast<double>(part.num_blocks());
  const double s_max = std::pow(p, 1.0 / r.q_tilde);
  if (!(s >= 1.0 && s <= s_max * (1.0 + 1e-12))) {
    throw ArgumentError("check_prop2_chain: s must lie in [1, p^{1/q~}]");
  }
  const double st = std::min(std::pow(s, r.q_tilde), p);
  r.lhs = estimate_bcmsv(BcmsvProblem{a, part, q1, s}, options).value;
  r.mid = estimate_bcmsv(BcmsvProblem{a, part, q2, st}, options).value;
  r.rhs = std::pow(s, -r.q_tilde) * estimate_bcmsv(BcmsvProblem{a, part, q1, st}, options).value;
  const double slack = 1e-3 + allowance;
  r.holds = r.lhs >= r.mid - slack && r.mid >= r.rhs - slack;
  return r;
}

}  // namespace bcmsv
