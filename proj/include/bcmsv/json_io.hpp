#pragma once

// JSON views of the estimator, certificate and recovery reports.

#include <nlohmann/json.hpp>

#include <cmath>
#include <vector>

#include "bcmsv/bcmsv_estimator.hpp"
#include "bcmsv/ccp_certifier.hpp"
#include "bcmsv/recovery_solvers.hpp"

namespace bcmsv {

namespace detail {

/// JSON has no infinities; q = inf is written as the string "inf".
inline nlohmann::json q_json(double q) {
  if (std::isinf(q)) return "inf";
  return q;
}

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

inline nlohmann::json to_json(const BcmsvEstimate& est, const BcmsvProblem& prob) {
  std::vector<nlohmann::json> per;
  per.reserve(est.per_restart_values.size());
  for (double v : est.per_restart_values) per.push_back(detail::finite_or_null(v));
  return {
      {"value", est.value},
      {"restarts", est.restarts},
      {"per_restart_values", per},
      {"converged_restarts", std::count(est.converged_flags.begin(), est.converged_flags.end(), true)},
      {"seed", est.seed},
      {"q", detail::q_json(prob.q)},
      {"s", prob.s},
      {"n", prob.partition.block_len()},
      {"m", prob.A.rows()},
      {"N", prob.A.cols()},
      {"elapsed_seconds", est.elapsed_seconds},
  };
}

inline nlohmann::json to_json(const SparsityCertificate& cert, const BlockPartition& part, Eigen::Index m) {
  return {
      {"k_max", cert.k_max},
      {"optimal_value", cert.optimal_value},
      {"threshold", detail::finite_or_null(cert.threshold)},
      {"trivial_kernel", cert.trivial_kernel},
      {"kernel_dim", cert.kernel_dim},
      {"q", detail::q_json(cert.q)},
      {"n", part.block_len()},
      {"m", m},
      {"N", part.total_len()},
      {"seed", cert.seed},
      {"iterations_used", cert.iterations_used},
      {"initializations", cert.initializations},
  };
}

inline nlohmann::json to_json(const RecoveryResult& res, const RecoveryProblem& prob) {
  return {
      {"program", program_name(res.program)},
      {"noise_level", prob.noise_level},
      {"objective", res.objective},
      {"primal_feasibility", res.primal_feasibility},
      {"optimality_residual", res.optimality_residual},
      {"iterations", res.iterations},
      {"converged", res.converged},
      {"x_hat", std::vector<double>(res.x_hat.data(), res.x_hat.data() + res.x_hat.size())},
      {"n", prob.partition.block_len()},
      {"m", prob.A.rows()},
      {"N", prob.A.cols()},
  };
}

}  // namespace bcmsv
