#pragma once

// Experiment drivers behind the bcmsv-lab command line: the CCP sparsity
// table, the BCMSV table, the restart-convergence and bound-comparison
// figures, the bound-validity harness and the m-trend sweep.
//
// Seeding: replicate r of a command draws its matrix from
// derive_seed(seed, r) (offset per ensemble for the CCP table) and shares it
// across all cells of that replicate. Rows are drawn first, so the m-sweep is
// nested. Cells are independent jobs; results do not depend on --jobs.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bcmsv/bcmsv_estimator.hpp"
#include "bcmsv/block_core.hpp"
#include "bcmsv/bounds.hpp"
#include "bcmsv/ccp_certifier.hpp"
#include "bcmsv/csv.hpp"
#include "bcmsv/ensembles.hpp"
#include "bcmsv/errors.hpp"
#include "bcmsv/recovery_solvers.hpp"
#include "bcmsv/rng.hpp"

namespace bcmsv {

struct ExperimentConfig {
  std::string command;
  std::vector<std::string> ensembles;
  std::size_t N = 0;
  std::vector<std::size_t> n;
  std::vector<std::size_t> m;
  std::vector<double> q;
  std::vector<double> s;
  std::vector<std::size_t> k;
  std::uint64_t seed = 20190101;
  /// 0 selects the command default (restarts 40, or 50 for fig1; replicates 1, or 5 for trend-m).
  int restarts = 0;
  int replicates = 0;
  int jobs = 1;
  int initializations = 10;
  int ric_samples = 1000;
  /// verify-bounds: trials with block-sparse and with compressible truths.
  int trials = 200;
  int compressible_trials = 100;
  /// verify-bounds: distinct matrices cycled through by the trials.
  int matrices = 20;
  double kappa = 0.25;
  /// zeta for fig2; noise level for verify-bounds.
  double zeta = 1.0;
  double noise = 0.1;
  std::string output;
};

inline std::string format_q(double q) { return std::isinf(q) ? "inf" : csv::format_double(q); }

/// Fills every field left empty with the command's default grid.
inline ExperimentConfig with_defaults(ExperimentConfig c) {
  auto fill = [](auto& v, auto def) {
    if (v.empty()) v = def;
  };
  const std::string& cmd = c.command;
  if (c.restarts == 0) c.restarts = cmd == "fig1" ? 50 : 40;
  if (c.replicates == 0) c.replicates = cmd == "trend-m" ? 5 : 1;
  if (cmd == "table1") {
    fill(c.ensembles, std::vector<std::string>{"bernoulli", "gaussian"});
    if (c.N == 0) c.N = 256;
    fill(c.n, std::vector<std::size_t>{1, 2, 4, 8});
    fill(c.m, std::vector<std::size_t>{64, 128, 192});
    fill(c.q, std::vector<double>{2, 4, 16, 128});
  } else if (cmd == "table2") {
    fill(c.ensembles, std::vector<std::string>{"bernoulli"});
    if (c.N == 0) c.N = 64;
    fill(c.n, std::vector<std::size_t>{1, 4, 8});
    fill(c.m, std::vector<std::size_t>{40, 50, 60});
    fill(c.q, std::vector<double>{2, 4, 8});
    fill(c.s, std::vector<double>{2, 4, 8});
  } else if (cmd == "fig1") {
    fill(c.ensembles, std::vector<std::string>{"bernoulli"});
    if (c.N == 0) c.N = 64;
    fill(c.n, std::vector<std::size_t>{4});
    fill(c.m, std::vector<std::size_t>{40});
    fill(c.q, std::vector<double>{2, 4, 8});
    fill(c.s, std::vector<double>{4});
  } else if (cmd == "fig2") {
    fill(c.ensembles, std::vector<std::string>{"hadamard"});
    if (c.N == 0) c.N = 64;
    fill(c.n, std::vector<std::size_t>{1, 2});
    fill(c.m, std::vector<std::size_t>{16, 24, 32, 40, 48, 56, 64});
    fill(c.q, std::vector<double>{1.8});
    fill(c.k, std::vector<std::size_t>{1, 2, 4});
  } else if (cmd == "verify-bounds") {
    fill(c.ensembles, std::vector<std::string>{"gaussian"});
    if (c.N == 0) c.N = 64;
    fill(c.n, std::vector<std::size_t>{2});
    fill(c.m, std::vector<std::size_t>{56});
    fill(c.q, std::vector<double>{2});
    fill(c.k, std::vector<std::size_t>{1});
  } else if (cmd == "trend-m") {
    fill(c.ensembles, std::vector<std::string>{"bernoulli"});
    if (c.N == 0) c.N = 64;
    fill(c.n, std::vector<std::size_t>{1});
    fill(c.m, std::vector<std::size_t>{16, 32, 48, 64});
    fill(c.q, std::vector<double>{2});
    fill(c.s, std::vector<double>{4});
  }
  if (c.restarts < 1 || c.replicates < 1 || c.jobs < 1) {
    throw ArgumentError("restarts, replicates and jobs must be >= 1");
  }
  return c;
}

/// One-line description of the resolved configuration, written as the first
/// line of every CSV.
inline std::string describe(const ExperimentConfig& c) {
  std::ostringstream os;
  auto list = [&](const char* name, const auto& v, auto fmt) {
    if (v.empty()) return;
    os << ' ' << name << '=';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << fmt(v[i]);
  };
  auto plain = [](const auto& x) {
    std::ostringstream s;
    s << x;
    return s.str();
  };
  os << "# bcmsv-lab " << c.command;
  list("ensemble", c.ensembles, plain);
  os << " N=" << c.N;
  list("n", c.n, plain);
  list("m", c.m, plain);
  list("q", c.q, format_q);
  list("s", c.s, [](double v) { return csv::format_double(v); });
  list("k", c.k, plain);
  os << " seed=" << c.seed << " restarts=" << c.restarts << " replicates=" << c.replicates;
  if (c.command == "table1") os << " initializations=" << c.initializations;
  if (c.command == "fig2") os << " zeta=" << csv::format_double(c.zeta) << " ric_samples=" << c.ric_samples;
  if (c.command == "verify-bounds") {
    os << " trials=" << c.trials << " compressible_trials=" << c.compressible_trials << " matrices=" << c.matrices
       << " kappa=" << csv::format_double(c.kappa) << " noise=" << csv::format_double(c.noise);
  }
  return os.str();
}

/// Runs fn(i) for i in [0, count) on `jobs` threads; the first exception is
/// rethrown after all workers stop.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long long>(jobs, 1, static_cast<long long>(std::max<std::size_t>(count, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Table 1: CCP sparsity certificates

struct Table1Row {
  std::string ensemble;
  std::size_t n = 0;
  std::size_t m = 0;
  double q = 0.0;
  /// Median over replicates (lower median for an even count).
  std::size_t k_max = 0;
  std::vector<std::size_t> per_replicate;
};

inline std::vector<Table1Row> run_table1(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  struct Cell {
    std::size_t e, n, m, q, r;
  };
  std::vector<Cell> cells;
  for (std::size_t e = 0; e < cfg.ensembles.size(); ++e)
    for (std::size_t a = 0; a < cfg.n.size(); ++a)
      for (std::size_t b = 0; b < cfg.m.size(); ++b)
        for (std::size_t c = 0; c < cfg.q.size(); ++c)
          for (int r = 0; r < cfg.replicates; ++r) cells.push_back({e, a, b, c, static_cast<std::size_t>(r)});
  std::vector<std::size_t> k(cells.size());
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    const std::uint64_t mseed = derive_seed(cfg.seed, c.e * 100000 + c.r);
    const auto A = generate(cfg.ensembles[c.e], cfg.m[c.m], cfg.N, mseed);
    CcpConfig cc;
    cc.q = cfg.q[c.q];
    cc.num_initializations = cfg.initializations;
    cc.seed = derive_seed(mseed, 1);
    k[i] = certify_max_sparsity(A.entries, BlockPartition(cfg.N, cfg.n[c.n]), cc).k_max;
  });
  std::vector<Table1Row> rows;
  for (std::size_t i = 0; i < cells.size(); i += static_cast<std::size_t>(cfg.replicates)) {
    const Cell& c = cells[i];
    Table1Row row{cfg.ensembles[c.e], cfg.n[c.n], cfg.m[c.m], cfg.q[c.q], 0, {}};
    row.per_replicate.assign(k.begin() + static_cast<std::ptrdiff_t>(i),
                             k.begin() + static_cast<std::ptrdiff_t>(i) + cfg.replicates);
    std::vector<std::size_t> sorted = row.per_replicate;
    std::sort(sorted.begin(), sorted.end());
    row.k_max = sorted[(sorted.size() - 1) / 2];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_table1(std::ostream& os, const ExperimentConfig& cfg, const std::vector<Table1Row>& rows) {
  os << describe(with_defaults(cfg)) << '\n' << "ensemble,n,m,q,k_max\n";
  for (const auto& r : rows) os << r.ensemble << ',' << r.n << ',' << r.m << ',' << format_q(r.q) << ',' << r.k_max << '\n';
}

// ---------------------------------------------------------------------------
// Table 2: BCMSV grid

struct Table2Row {
  std::size_t m = 0, n = 0, p = 0;
  double q = 0.0, s = 0.0;
  /// Mean over replicates.
  double beta = 0.0;
  std::vector<double> per_replicate;
};

inline std::vector<Table2Row> run_table2(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  struct Cell {
    std::size_t m, n, q, s, r;
  };
  std::vector<Cell> cells;
  for (std::size_t a = 0; a < cfg.m.size(); ++a)
    for (std::size_t b = 0; b < cfg.n.size(); ++b)
      for (std::size_t c = 0; c < cfg.q.size(); ++c)
        for (std::size_t d = 0; d < cfg.s.size(); ++d)
          for (int r = 0; r < cfg.replicates; ++r) cells.push_back({a, b, c, d, static_cast<std::size_t>(r)});
  std::vector<double> beta(cells.size());
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    const std::uint64_t mseed = derive_seed(cfg.seed, c.r);
    const auto A = generate(cfg.ensembles.front(), cfg.m[c.m], cfg.N, mseed);
    BcmsvOptions opt;
    opt.restarts = cfg.restarts;
    opt.seed = derive_seed(mseed, 1);
    beta[i] = estimate_bcmsv(BcmsvProblem{A.entries, BlockPartition(cfg.N, cfg.n[c.n]), cfg.q[c.q], cfg.s[c.s]}, opt)
                  .value;
  });
  std::vector<Table2Row> rows;
  for (std::size_t i = 0; i < cells.size(); i += static_cast<std::size_t>(cfg.replicates)) {
    const Cell& c = cells[i];
    Table2Row row{cfg.m[c.m], cfg.n[c.n], cfg.N / cfg.n[c.n], cfg.q[c.q], cfg.s[c.s], 0.0, {}};
    row.per_replicate.assign(beta.begin() + static_cast<std::ptrdiff_t>(i),
                             beta.begin() + static_cast<std::ptrdiff_t>(i) + cfg.replicates);
    row.beta = std::accumulate(row.per_replicate.begin(), row.per_replicate.end(), 0.0) /
               static_cast<double>(row.per_replicate.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_table2(std::ostream& os, const ExperimentConfig& cfg, const std::vector<Table2Row>& rows) {
  os << describe(with_defaults(cfg)) << '\n' << "m,n,p,q,s,beta\n";
  for (const auto& r : rows) {
    os << r.m << ',' << r.n << ',' << r.p << ',' << format_q(r.q) << ',' << csv::format_double(r.s) << ','
       << csv::format_double(r.beta) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Figure 1: running minimum over restarts

struct Fig1Row {
  double q = 0.0;
  int restart = 0;  // 1-based
  double value = 0.0;
  double running_min = 0.0;
};

inline std::vector<Fig1Row> run_fig1(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  const std::uint64_t mseed = derive_seed(cfg.seed, 0);
  const auto A = generate(cfg.ensembles.front(), cfg.m.front(), cfg.N, mseed);
  std::vector<std::vector<Fig1Row>> per_q(cfg.q.size());
  parallel_for(cfg.q.size(), cfg.jobs, [&](std::size_t i) {
    BcmsvOptions opt;
    opt.restarts = cfg.restarts;
    opt.seed = derive_seed(mseed, 1);
    const auto est =
        estimate_bcmsv(BcmsvProblem{A.entries, BlockPartition(cfg.N, cfg.n.front()), cfg.q[i], cfg.s.front()}, opt);
    double best = kInf;
    for (int r = 0; r < est.restarts; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      const double v = est.converged_flags[ri] ? est.per_restart_values[ri] : kInf;
      best = std::min(best, v);
      per_q[i].push_back({cfg.q[i], r + 1, v, best});
    }
  });
  std::vector<Fig1Row> rows;
  for (auto& v : per_q) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

inline void write_fig1(std::ostream& os, const ExperimentConfig& cfg, const std::vector<Fig1Row>& rows) {
  os << describe(with_defaults(cfg)) << '\n' << "q,restart,value,running_min\n";
  auto num = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); };
  for (const auto& r : rows) {
    os << format_q(r.q) << ',' << r.restart << ',' << num(r.value) << ',' << num(r.running_min) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Figure 2: BCMSV bound against block RIC bound

inline std::vector<BoundComparison> run_fig2(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  struct Cell {
    std::size_t m, k, n;
  };
  std::vector<Cell> cells;
  for (std::size_t b = 0; b < cfg.n.size(); ++b)
    for (std::size_t c = 0; c < cfg.k.size(); ++c)
      for (std::size_t a = 0; a < cfg.m.size(); ++a) {
        if (2 * cfg.k[c] <= cfg.N / cfg.n[b]) cells.push_back({a, c, b});
      }
  std::vector<BoundComparison> rows(cells.size());
  const std::uint64_t mseed = derive_seed(cfg.seed, 0);
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    const auto A = generate(cfg.ensembles.front(), cfg.m[c.m], cfg.N, mseed);
    BcmsvOptions opt;
    opt.restarts = cfg.restarts;
    rows[i] = compare_bounds(A.entries, BlockPartition(cfg.N, cfg.n[c.n]), cfg.k[c.k], cfg.q.front(), cfg.zeta, opt,
                             cfg.ric_samples, derive_seed(mseed, 1 + i));
  });
  return rows;
}

inline void write_fig2(std::ostream& os, const ExperimentConfig& cfg, const std::vector<BoundComparison>& rows) {
  os << describe(with_defaults(cfg)) << '\n' << kComparisonCsvHeader << '\n';
  for (const auto& r : rows) write_comparison_row(os, r);
}

// ---------------------------------------------------------------------------
// Bound-validity harness

struct BoundTrial {
  int theorem = 1;
  Program program = Program::BBP;
  int trial = 0;
  double beta = 0.0;
  double scale = 0.0;
  double err_l2q = 0.0, bound_l2q = 0.0;
  double err_l21 = 0.0, bound_l21 = 0.0;
  bool cone_inside = true;
  bool converged = true;

  double slack_l2q() const { return bound_l2q - err_l2q; }
  double slack_l21() const { return bound_l21 - err_l21; }
  /// Bound violated beyond the 1e-9 allowance.
  bool violated() const { return slack_l2q() < -1e-9 || slack_l21() < -1e-9; }
};

struct BoundReport {
  std::vector<BoundTrial> trials;
  int violations = 0;
  int cone_failures = 0;
  int unconverged = 0;
  bool passed() const { return violations == 0 && cone_failures == 0 && unconverged == 0; }
};

namespace detail {

/// Block k-sparse signal with i.i.d. N(0,1) entries on a random support.
inline Vector sparse_truth(Rng& rng, const BlockPartition& part, std::size_t k) {
  const std::size_t p = part.num_blocks();
  const auto n = static_cast<Eigen::Index>(part.block_len());
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(perm[i], perm[i + rng.index(p - i)]);
  Vector x = Vector::Zero(static_cast<Eigen::Index>(part.total_len()));
  for (std::size_t i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n; ++j) x[static_cast<Eigen::Index>(perm[i]) * n + j] = rng.normal();
  return x;
}

/// Every block non-zero, block norms 0.5^j in a random order.
inline Vector compressible_truth(Rng& rng, const BlockPartition& part) {
  const std::size_t p = part.num_blocks();
  const auto n = static_cast<Eigen::Index>(part.block_len());
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < p; ++i) std::swap(perm[i], perm[i + rng.index(p - i)]);
  Vector x(static_cast<Eigen::Index>(part.total_len()));
  for (std::size_t i = 0; i < p; ++i) {
    Vector b(n);
    for (auto& e : b) e = rng.normal();
    x.segment(static_cast<Eigen::Index>(perm[i]) * n, n) = std::pow(0.5, static_cast<double>(i)) * b / b.norm();
  }
  return x;
}

}  // namespace detail

inline BoundReport run_verify_bounds(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  const std::size_t N = cfg.N, n = cfg.n.front(), m = cfg.m.front(), k = cfg.k.front();
  const double q = cfg.q.front();
  const BlockPartition part(N, n);
  const double p = static_cast<double>(part.num_blocks());
  const int mats = std::max(1, cfg.matrices);
  const QParam qp = QParam::from_value(q);

  std::vector<Matrix> As(static_cast<std::size_t>(mats));
  for (int i = 0; i < mats; ++i) {
    As[static_cast<std::size_t>(i)] =
        generate(cfg.ensembles.front(), m, N, derive_seed(cfg.seed, static_cast<std::uint64_t>(i))).entries;
  }
  // beta per (matrix, scale), estimated once
  std::map<std::pair<int, double>, double> beta_cache;
  std::mutex cache_mutex;
  auto beta_at = [&](int mi, double scale) {
    const double s = std::min(scale, p);
    {
      std::lock_guard lock(cache_mutex);
      auto it = beta_cache.find({mi, s});
      if (it != beta_cache.end()) return it->second;
    }
    BcmsvOptions opt;
    opt.restarts = cfg.restarts;
    opt.seed = derive_seed(cfg.seed, 1000003 + static_cast<std::uint64_t>(mi));
    const double b = estimate_bcmsv(BcmsvProblem{As[static_cast<std::size_t>(mi)], part, q, s}, opt).value;
    std::lock_guard lock(cache_mutex);
    beta_cache[{mi, s}] = b;
    return b;
  };

  struct Job {
    int theorem;
    Program program;
    int trial;
  };
  std::vector<Job> jobs;
  for (int th : {1, 2}) {
    const int count = th == 1 ? cfg.trials : cfg.compressible_trials;
    for (Program pr : {Program::BBP, Program::BDS, Program::GroupLasso})
      for (int t = 0; t < count; ++t) jobs.push_back({th, pr, t});
  }
  // estimate every needed beta up front so that workers only read the cache
  for (int mi = 0; mi < mats; ++mi) {
    for (Program pr : {Program::BBP, Program::GroupLasso}) {
      if (cfg.trials > 0) beta_at(mi, theorem1_scale(pr, k, q, cfg.kappa));
      if (cfg.compressible_trials > 0) beta_at(mi, theorem2_scale(pr, k, q, cfg.kappa));
    }
  }

  BoundReport report;
  report.trials.resize(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    const int mi = job.trial % mats;
    const Matrix& A = As[static_cast<std::size_t>(mi)];
    Rng rng(derive_seed(cfg.seed, 2000000 + 100000 * static_cast<std::uint64_t>(job.theorem) +
                                      10000 * static_cast<std::uint64_t>(job.program) +
                                      static_cast<std::uint64_t>(job.trial)));
    const Vector x = job.theorem == 1 ? detail::sparse_truth(rng, part, k) : detail::compressible_truth(rng, part);
    Vector eps(static_cast<Eigen::Index>(m));
    for (auto& e : eps) e = rng.normal();
    double level = cfg.noise;
    std::optional<double> kappa;
    switch (job.program) {
      case Program::BBP: eps *= cfg.noise / eps.norm(); break;
      case Program::BDS:
        eps *= cfg.noise / mixed_norm(Vector(A.transpose() * eps), part, QParam::infinity());
        break;
      case Program::GroupLasso:
        kappa = cfg.kappa;
        eps *= cfg.kappa * cfg.noise / mixed_norm(Vector(A.transpose() * eps), part, QParam::infinity());
        break;
    }
    const RecoveryProblem prob{A, A * x + eps, part, job.program, level};
    RecoveryOptions ropt;
    ropt.throw_on_nonconvergence = false;
    const RecoveryResult res = solve(prob, ropt);

    BoundTrial tr;
    tr.theorem = job.theorem;
    tr.program = job.program;
    tr.trial = job.trial;
    tr.converged = res.converged;
    const double scale =
        job.theorem == 1 ? theorem1_scale(job.program, k, q, kappa) : theorem2_scale(job.program, k, q, kappa);
    tr.scale = scale;
    tr.beta = beta_at(mi, scale);
    const Vector h = res.x_hat - x;
    tr.err_l2q = mixed_norm(h, part, qp);
    tr.err_l21 = mixed_norm(h, part, QParam::one());
    BoundInput in{tr.beta, k, q, level, kappa, 0.0};
    if (job.theorem == 1) {
      const auto b = tr.beta > 0.0 ? theorem1_bounds(in, job.program) : ErrorBounds{kInf, kInf, scale};
      tr.bound_l2q = b.l2q_bound;
      tr.bound_l21 = b.l21_bound;
      tr.cone_inside = residual_cone_check(x, res.x_hat, part, k, q, job.program, cfg.kappa).inside;
    } else {
      in.phi_k = best_block_k_approx_error(BlockVector(x, part), k);
      const auto b = tr.beta > 0.0 ? theorem2_bounds(in, job.program) : ErrorBounds{kInf, kInf, scale};
      tr.bound_l2q = b.l2q_bound;
      tr.bound_l21 = b.l21_bound;
      tr.cone_inside = compressible_cone_check(x, res.x_hat, part, k, q, job.program, cfg.kappa).inside;
    }
    report.trials[i] = tr;
  });
  for (const auto& t : report.trials) {
    report.violations += t.violated() ? 1 : 0;
    report.cone_failures += t.cone_inside ? 0 : 1;
    report.unconverged += t.converged ? 0 : 1;
  }
  return report;
}

inline void write_verify_bounds(std::ostream& os, const ExperimentConfig& cfg, const BoundReport& rep) {
  os << describe(with_defaults(cfg)) << '\n'
     << "theorem,program,trial,beta,scale,err_l2q,bound_l2q,slack_l2q,err_l21,bound_l21,slack_l21,cone_inside,"
        "converged\n";
  for (const auto& t : rep.trials) {
    os << t.theorem << ',' << program_name(t.program) << ',' << t.trial << ',' << csv::format_double(t.beta) << ','
       << csv::format_double(t.scale) << ',' << csv::format_double(t.err_l2q) << ','
       << csv::format_double(t.bound_l2q) << ',' << csv::format_double(t.slack_l2q()) << ','
       << csv::format_double(t.err_l21) << ',' << csv::format_double(t.bound_l21) << ','
       << csv::format_double(t.slack_l21()) << ',' << (t.cone_inside ? 1 : 0) << ',' << (t.converged ? 1 : 0)
       << '\n';
  }
}

// ---------------------------------------------------------------------------
// m-trend of beta

struct TrendRow {
  std::size_t m = 0;
  double mean_beta = 0.0;
  double min_beta = 0.0;
  std::vector<double> per_seed;
};

inline std::vector<TrendRow> run_trend_m(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = with_defaults(cfg_in);
  const auto R = static_cast<std::size_t>(cfg.replicates);
  std::vector<double> beta(cfg.m.size() * R);
  parallel_for(beta.size(), cfg.jobs, [&](std::size_t i) {
    const std::size_t mi = i / R, r = i % R;
    const std::uint64_t mseed = derive_seed(cfg.seed, r);
    const auto A = generate(cfg.ensembles.front(), cfg.m[mi], cfg.N, mseed);
    BcmsvOptions opt;
    opt.restarts = cfg.restarts;
    opt.seed = derive_seed(mseed, 1);
    beta[i] =
        estimate_bcmsv(BcmsvProblem{A.entries, BlockPartition(cfg.N, cfg.n.front()), cfg.q.front(), cfg.s.front()}, opt)
            .value;
  });
  std::vector<TrendRow> rows;
  for (std::size_t mi = 0; mi < cfg.m.size(); ++mi) {
    TrendRow row;
    row.m = cfg.m[mi];
    row.per_seed.assign(beta.begin() + static_cast<std::ptrdiff_t>(mi * R),
                        beta.begin() + static_cast<std::ptrdiff_t>((mi + 1) * R));
    row.mean_beta = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / static_cast<double>(R);
    row.min_beta = *std::min_element(row.per_seed.begin(), row.per_seed.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_trend_m(std::ostream& os, const ExperimentConfig& cfg, const std::vector<TrendRow>& rows) {
  const ExperimentConfig c = with_defaults(cfg);
  os << describe(c) << '\n' << "m,mean_beta,min_beta,seeds\n";
  for (const auto& r : rows) {
    os << r.m << ',' << csv::format_double(r.mean_beta) << ',' << csv::format_double(r.min_beta) << ','
       << r.per_seed.size() << '\n';
  }
}

}  // namespace bcmsv
