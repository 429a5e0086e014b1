#include <gtest/gtest.h>

#include <cmath>

#include "bcmsv/ccp_certifier.hpp"
#include "bcmsv/ensembles.hpp"
#include "bcmsv/recovery_solvers.hpp"
#include "oracles.hpp"

using namespace bcmsv;

TEST(CcpThreshold, ClosedForms) {
  // kernel of [1, 1] is spanned by (1, -1): V = 2^{1/q} / 2, k_q = 2, so the
  // threshold is 2 * 2^{q/(1-q)} = 2^{-1/(q-1)}
  for (double q : {1.5, 2.0, 4.0, 16.0}) {
    const double v = std::pow(2.0, 1.0 / q) / 2.0;
    EXPECT_NEAR(ccp_threshold(v, q), std::pow(2.0, -1.0 / (q - 1.0)), 1e-12) << q;
  }
  EXPECT_NEAR(ccp_threshold(std::pow(2.0, 0.5) / 2.0, 2.0), 0.5, 1e-12);
  EXPECT_NEAR(ccp_threshold(0.5, kInf), 1.0, 1e-15);
  EXPECT_EQ(k_max_from_threshold(0.5, 2), 0u);
  EXPECT_EQ(k_max_from_threshold(4.0, 10), 3u);
  EXPECT_EQ(k_max_from_threshold(4.2, 10), 4u);
  EXPECT_EQ(k_max_from_threshold(40.0, 10), 10u);
  EXPECT_EQ(k_max_from_threshold(kInf, 7), 7u);
}

TEST(CcpCertify, TwoColumnExample) {
  Matrix A(1, 2);
  A << 1, 1;
  for (double q : {2.0, 4.0, kInf}) {
    CcpConfig cfg;
    cfg.q = q;
    const auto cert = certify_max_sparsity(A, BlockPartition(2, 1), cfg);
    EXPECT_EQ(cert.k_max, 0u) << q;
    EXPECT_EQ(cert.kernel_dim, 1u);
    EXPECT_NEAR(std::abs(cert.witness[0]), 0.5, 1e-8);
    EXPECT_NEAR(cert.witness[0] + cert.witness[1], 0.0, 1e-8);
  }
}

TEST(CcpCertify, TrivialKernelCertifiesEverything) {
  const Matrix A = gen_gaussian(8, 8, 1, false).entries;
  const auto cert = certify_max_sparsity(A, BlockPartition(8, 2));
  EXPECT_TRUE(cert.trivial_kernel);
  EXPECT_EQ(cert.k_max, 4u);
}

TEST(CcpCertify, RejectsBadConfig) {
  CcpConfig bad;
  bad.q = 1.0;
  EXPECT_THROW(certify_max_sparsity(Matrix::Ones(1, 2), BlockPartition(2, 1), bad), ArgumentError);
  bad = {};
  bad.num_initializations = 0;
  EXPECT_THROW(certify_max_sparsity(Matrix::Ones(1, 2), BlockPartition(2, 1), bad), ArgumentError);
  EXPECT_THROW(certify_max_sparsity(Matrix::Ones(1, 3), BlockPartition(2, 1)), ArgumentError);
}

TEST(CcpInner, Examples) {
  Matrix A(1, 2);
  A << 1, 1;
  const BlockPartition part(2, 1);
  Vector c(2);
  c << 1, -1;
  const Vector z = ccp_inner_maximize(c, A, part);
  EXPECT_NEAR(z[0], 0.5, 1e-8);
  EXPECT_NEAR(z[1], -0.5, 1e-8);
  EXPECT_NEAR(c.dot(ccp_inner_maximize(c, A, part, 2.0)), 2.0, 1e-8);
  Vector ortho(2);
  ortho << 1, 1;
  EXPECT_TRUE(ccp_inner_maximize(ortho, A, part).isZero());
}

TEST(CcpInner, AgreesWithVertexEnumeration) {
  // for n = 1 the maximum of a linear function over ker A and the l1 ball is
  // attained at a vertex; enumerate them through the LP oracle
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    const Matrix A = gen_gaussian(3, 6, 40 + static_cast<std::uint64_t>(t), false).entries;
    Vector c(6);
    for (auto& e : c) e = rng.normal();
    const Vector z = ccp_inner_maximize(c, A, BlockPartition(6, 1));
    const Matrix K = oracle::kernel_basis(A);
    // z = K w removes the equalities; the LP in (w, u) has |z_i| <= u_i, sum u <= 1
    Matrix M2 = Matrix::Zero(13, K.cols() + 6);
    Vector b2 = Vector::Zero(13);
    for (Eigen::Index i = 0; i < 6; ++i) {
      M2.block(i, 0, 1, K.cols()) = K.row(i);
      M2(i, K.cols() + i) = -1.0;
      M2.block(6 + i, 0, 1, K.cols()) = -K.row(i);
      M2(6 + i, K.cols() + i) = -1.0;
    }
    M2.block(12, K.cols(), 1, 6).setOnes();
    b2[12] = 1.0;
    Vector cost = Vector::Zero(K.cols() + 6);
    cost.head(K.cols()) = -(K.transpose() * c);
    const double best = -oracle::lp_min_vertex(cost, M2, b2);
    EXPECT_NEAR(c.dot(z), best, 1e-7 * std::max(1.0, best));
    EXPECT_LT((A * z).norm(), 1e-8);
    EXPECT_LE(z.lpNorm<1>(), 1.0 + 1e-8);
  }
}

TEST(CcpCertify, MonotoneAndFeasibleIterates) {
  const Matrix A = gen_bernoulli(20, 40, 3).entries;
  for (std::size_t n : {1u, 2u}) {
    for (double q : {2.0, 4.0, kInf}) {
      CcpConfig cfg;
      cfg.q = q;
      cfg.num_initializations = 3;
      const BlockPartition part(40, n);
      const auto cert = certify_max_sparsity(A, part, cfg);
      for (const auto& traj : cert.trajectories) {
        for (std::size_t i = 1; i < traj.size(); ++i) EXPECT_GE(traj[i], traj[i - 1] - 1e-10);
      }
      EXPECT_LT(cert.max_kernel_residual, 1e-8);
      EXPECT_LE(cert.max_l21, 1.0 + 1e-8);
      EXPECT_LT((A * cert.witness).norm(), 1e-8);
      EXPECT_NEAR(mixed_norm(cert.witness, part, QParam::from_value(q)), cert.optimal_value, 1e-12);
    }
  }
}

TEST(CcpCertify, NeverAboveExactThresholdOnSmallMatrices) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t N = 6 + seed % 5;
    const std::size_t m = 2 + seed % 4;
    const Matrix A = gen_gaussian(m, N, 900 + seed, false).entries;
    for (double q : {2.0, 3.0}) {
      CcpConfig cfg;
      cfg.q = q;
      const auto cert = certify_max_sparsity(A, BlockPartition(N, 1), cfg);
      const double v_exact = oracle::ccp_optimum_n1(A, q);
      const double v_sampled = oracle::ccp_sampled(A, 1, q, 20000, seed);
      EXPECT_LE(v_sampled, v_exact + 1e-12);
      const std::size_t k_true = k_max_from_threshold(ccp_threshold(v_exact, q), N);
      EXPECT_LE(cert.k_max, k_true) << "N=" << N << " m=" << m << " q=" << q;
      EXPECT_LE(cert.optimal_value, v_exact + 1e-8);
    }
  }
}

TEST(CcpCertify, CertifiedLevelsAreRecoveredByBbp) {
  const Matrix A = gen_gaussian(24, 48, 12, false).entries;
  const BlockPartition part(48, 2);
  const auto cert = certify_max_sparsity(A, part);
  ASSERT_GE(cert.k_max, 1u);
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    Vector x = Vector::Zero(48);
    std::vector<std::size_t> blocks(24);
    std::iota(blocks.begin(), blocks.end(), std::size_t{0});
    for (std::size_t i = 0; i < cert.k_max; ++i) {
      std::swap(blocks[i], blocks[i + rng.index(24 - i)]);
      x[static_cast<Eigen::Index>(2 * blocks[i])] = rng.normal();
      x[static_cast<Eigen::Index>(2 * blocks[i] + 1)] = rng.normal();
    }
    const auto res = solve_bbp(RecoveryProblem{A, A * x, part, Program::BBP, 0.0});
    EXPECT_LE((res.x_hat - x).norm(), 1e-6 * x.norm());
  }
}

TEST(CcpCertify, DeterministicGivenSeed) {
  const Matrix A = gen_bernoulli(16, 32, 2).entries;
  CcpConfig cfg;
  cfg.num_initializations = 3;
  const auto a = certify_max_sparsity(A, BlockPartition(32, 1), cfg);
  const auto b = certify_max_sparsity(A, BlockPartition(32, 1), cfg);
  EXPECT_EQ(a.optimal_value, b.optimal_value);
  EXPECT_EQ(a.k_max, b.k_max);
}
