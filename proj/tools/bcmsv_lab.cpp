// bcmsv-lab: experiment grids and single-shot tools.
//
// Exit codes: 0 success, 2 bound violations in verify-bounds, 1 any error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "bcmsv/bcmsv_estimator.hpp"
#include "bcmsv/ccp_certifier.hpp"
#include "bcmsv/ensembles.hpp"
#include "bcmsv/experiments.hpp"
#include "bcmsv/json_io.hpp"
#include "bcmsv/recovery_solvers.hpp"

namespace {

using namespace bcmsv;

struct SingleShot {
  std::string matrix_path;
  std::string y_path;
  std::string program = "bbp";
  double noise = 0.0;
  double tol = 1e-8;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("BCMSV_LAB_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ArgumentError("BCMSV_LAB_SEED is not an unsigned integer");
    }
  }
  return 20190101;
}

/// Fills options not given on the command line from a JSON object whose keys
/// are long flag names without the leading dashes.
void apply_config_file(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config file: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config file must hold a JSON object");
  auto text = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "command") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ArgumentError("config file: unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;  // the command line wins
    if (value.is_array()) {
      for (const auto& e : value) opt->add_result(text(e));
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

Matrix load_or_generate(const SingleShot& ss, const ExperimentConfig& c, std::size_t& N) {
  if (!ss.matrix_path.empty()) {
    std::ifstream in(ss.matrix_path);
    if (!in) throw ArgumentError("cannot open matrix file '" + ss.matrix_path + "'");
    Matrix a = read_matrix_csv(in).entries;
    N = static_cast<std::size_t>(a.cols());
    return a;
  }
  if (c.m.empty() || c.N == 0) throw ArgumentError("give --matrix or --m and --N");
  N = c.N;
  return generate(c.ensembles.empty() ? "gaussian" : c.ensembles.front(), c.m.front(), c.N, c.seed).entries;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ArgumentError("cannot open output '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bcmsv-lab: block compressed sensing experiments"};
  app.require_subcommand(1);
  app.set_config();  // disable CLI11's own config handling; JSON is handled below

  ExperimentConfig cfg;
  SingleShot ss;
  std::string config_path;
  std::optional<std::string> seed_text;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"table1", "CCP maximal sparsity levels over ensembles, n, m and q"},
      {"table2", "q-ratio BCMSV over m, n, q and s"},
      {"fig1", "BCMSV value and running minimum per restart"},
      {"fig2", "BCMSV bound against block RIC bound on Hadamard submatrices"},
      {"verify-bounds", "recovery error against the bounds for BBP, BDS and group lasso"},
      {"trend-m", "mean BCMSV over seeds as m grows"},
      {"bcmsv", "estimate the BCMSV of one matrix"},
      {"certify", "certify the maximal block sparsity of one matrix"},
      {"recover", "solve BBP, BDS or group lasso for one matrix and measurement"},
      {"gen-matrix", "write a random measurement matrix"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON file of flag values");
    sub->add_option("--ensemble", cfg.ensembles, "gaussian, gaussian-unit, bernoulli, hadamard")->delimiter(',');
    sub->add_option("--N", cfg.N, "signal length");
    sub->add_option("--n", cfg.n, "block length(s)")->delimiter(',');
    sub->add_option("--m", cfg.m, "number(s) of measurements")->delimiter(',');
    sub->add_option("--q", cfg.q, "q value(s); inf allowed where defined")->delimiter(',');
    sub->add_option("--s", cfg.s, "sparsity level(s) for the BCMSV")->delimiter(',');
    sub->add_option("--k", cfg.k, "block sparsity level(s)")->delimiter(',');
    sub->add_option("--seed", seed_text, "master seed (default: BCMSV_LAB_SEED or 20190101)");
    sub->add_option("--restarts", cfg.restarts, "BCMSV restarts (0: command default)");
    sub->add_option("--replicates", cfg.replicates, "independent matrices per cell (0: command default)");
    sub->add_option("--jobs", cfg.jobs, "worker threads");
    sub->add_option("--initializations", cfg.initializations, "CCP starting points");
    sub->add_option("--ric-samples", cfg.ric_samples, "block RIC supports sampled");
    sub->add_option("--trials", cfg.trials, "block-sparse trials per program");
    sub->add_option("--compressible-trials", cfg.compressible_trials, "compressible trials per program");
    sub->add_option("--matrices", cfg.matrices, "distinct matrices used by verify-bounds");
    sub->add_option("--kappa", cfg.kappa, "group lasso noise ratio in (0,1)");
    sub->add_option("--zeta", cfg.zeta, "noise level for fig2");
    sub->add_option("--noise", cfg.noise, "noise level for verify-bounds");
    sub->add_option("--output", cfg.output, "output file (default stdout)");
    if (name == "bcmsv" || name == "certify" || name == "recover") {
      sub->add_option("--matrix", ss.matrix_path, "matrix CSV (otherwise generated from --ensemble/--m/--N)");
    }
    if (name == "recover") {
      sub->add_option("--y", ss.y_path, "measurement vector CSV (N,n,p header with N = m, n = 1)")->required();
      sub->add_option("--program", ss.program, "bbp, bds or lasso");
      sub->add_option("--noise-level", ss.noise, "zeta for bbp, mu for bds and lasso");
      sub->add_option("--tol", ss.tol, "solver tolerance");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*sub, config_path);
    cfg.command = sub->get_name();
    cfg.seed = seed_text ? std::stoull(*seed_text) : default_seed();
    Output out(cfg.output);
    std::ostream& os = out.stream();
    const std::string& cmd = cfg.command;

    if (cmd == "table1") {
      write_table1(os, cfg, run_table1(cfg));
    } else if (cmd == "table2") {
      write_table2(os, cfg, run_table2(cfg));
    } else if (cmd == "fig1") {
      write_fig1(os, cfg, run_fig1(cfg));
    } else if (cmd == "fig2") {
      write_fig2(os, cfg, run_fig2(cfg));
    } else if (cmd == "trend-m") {
      write_trend_m(os, cfg, run_trend_m(cfg));
    } else if (cmd == "verify-bounds") {
      const BoundReport rep = run_verify_bounds(cfg);
      write_verify_bounds(os, cfg, rep);
      std::cerr << "verify-bounds: " << rep.trials.size() << " trials, " << rep.violations << " violations, "
                << rep.cone_failures << " cone failures, " << rep.unconverged << " unconverged\n";
      return rep.passed() ? 0 : 2;
    } else if (cmd == "gen-matrix") {
      if (cfg.m.empty() || cfg.N == 0) throw ArgumentError("gen-matrix needs --m and --N");
      write_matrix_csv(os, generate(cfg.ensembles.empty() ? "gaussian" : cfg.ensembles.front(), cfg.m.front(),
                                    cfg.N, cfg.seed));
    } else if (cmd == "bcmsv") {
      std::size_t N = 0;
      const Matrix a = load_or_generate(ss, cfg, N);
      const BcmsvProblem prob{a, BlockPartition(N, cfg.n.empty() ? 1 : cfg.n.front()),
                              cfg.q.empty() ? 2.0 : cfg.q.front(), cfg.s.empty() ? 1.0 : cfg.s.front()};
      BcmsvOptions opt;
      opt.restarts = with_defaults(cfg).restarts;
      opt.seed = cfg.seed;
      opt.jobs = cfg.jobs;
      os << to_json(estimate_bcmsv(prob, opt), prob).dump(2) << '\n';
    } else if (cmd == "certify") {
      std::size_t N = 0;
      const Matrix a = load_or_generate(ss, cfg, N);
      const BlockPartition part(N, cfg.n.empty() ? 1 : cfg.n.front());
      CcpConfig cc;
      cc.q = cfg.q.empty() ? 2.0 : cfg.q.front();
      cc.num_initializations = cfg.initializations;
      cc.seed = cfg.seed;
      os << to_json(certify_max_sparsity(a, part, cc), part, a.rows()).dump(2) << '\n';
    } else if (cmd == "recover") {
      std::size_t N = 0;
      const Matrix a = load_or_generate(ss, cfg, N);
      std::ifstream yin(ss.y_path);
      if (!yin) throw ArgumentError("cannot open '" + ss.y_path + "'");
      const Vector y = read_vector_csv(yin).values();
      const RecoveryProblem prob{a, y, BlockPartition(N, cfg.n.empty() ? 1 : cfg.n.front()),
                                 parse_program(ss.program), ss.noise};
      RecoveryOptions ro;
      ro.tol = ss.tol;
      os << to_json(solve(prob, ro), prob).dump(2) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bcmsv-lab: " << e.what() << '\n';
    return 1;
  }
}
