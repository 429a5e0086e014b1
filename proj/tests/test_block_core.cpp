#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bcmsv/block_core.hpp"
#include "bcmsv/rng.hpp"
#include "oracles.hpp"

using namespace bcmsv;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

// random signal with a random number of zero blocks and a wide dynamic range
Vector random_signal(Rng& rng, const BlockPartition& part) {
  Vector x(static_cast<Eigen::Index>(part.total_len()));
  for (auto& e : x) e = rng.normal() * std::exp(2.0 * rng.normal());
  const std::size_t zeros = rng.index(part.num_blocks());
  const auto n = static_cast<Eigen::Index>(part.block_len());
  for (std::size_t z = 0; z < zeros; ++z) x.segment(static_cast<Eigen::Index>(rng.index(part.num_blocks())) * n, n).setZero();
  if (x.isZero()) x[0] = 1.0;
  return x;
}

}  // namespace

TEST(BlockPartition, RejectsInconsistentShapes) {
  EXPECT_THROW(BlockPartition(7, 2), ArgumentError);
  EXPECT_THROW(BlockPartition(0, 1), ArgumentError);
  EXPECT_THROW(BlockPartition(4, 0), ArgumentError);
  const BlockPartition p(12, 3);
  EXPECT_EQ(p.num_blocks(), 4u);
  EXPECT_EQ(BlockPartition::from_blocks(4, 3), p);
}

TEST(BlockVector, LengthMustMatch) {
  EXPECT_THROW(BlockVector(Vector::Zero(3), BlockPartition(4, 2)), ArgumentError);
}

TEST(BlockSupport, ValidatesIndices) {
  const BlockPartition p(6, 2);
  EXPECT_THROW(BlockSupport({0, 0}, p), ArgumentError);
  EXPECT_THROW(BlockSupport({3}, p), ArgumentError);
  EXPECT_TRUE(BlockSupport({2, 0}, p).contains(2));
}

TEST(BlockNorms, Examples) {
  const BlockPartition p(4, 2);
  EXPECT_TRUE(block_norms(vec({3, 4, 0, 0}), p).isApprox(vec({5, 0})));
  EXPECT_TRUE(block_norms(Vector::Zero(4), p).isZero());
  EXPECT_TRUE(block_norms(vec({1, 0, 0, 1}), p).isApprox(vec({1, 1})));
}

TEST(MixedNorm, Examples) {
  const BlockPartition p(4, 2);
  const Vector x = vec({3, 0, 0, 4});
  EXPECT_DOUBLE_EQ(mixed_norm(x, p, QParam::one()), 7.0);
  EXPECT_DOUBLE_EQ(mixed_norm(x, p, QParam::infinity()), 4.0);
  EXPECT_DOUBLE_EQ(mixed_norm(x, p, QParam::finite(2.0)), 5.0);
  EXPECT_DOUBLE_EQ(mixed_norm(x, p, QParam::zero()), 2.0);
  EXPECT_DOUBLE_EQ(mixed_norm(vec({0, 0, 1, 1}), p, QParam::zero()), 1.0);
}

TEST(QRatioSparsity, Examples) {
  const BlockPartition p(4, 2);
  const Vector x = vec({3, 0, 0, 4});
  EXPECT_NEAR(q_ratio_block_sparsity(x, p, QParam::finite(2.0)), 1.96, 1e-12);
  const double h = -(3.0 / 7) * std::log(3.0 / 7) - (4.0 / 7) * std::log(4.0 / 7);
  EXPECT_NEAR(q_ratio_block_sparsity(x, p, QParam::one()), std::exp(h), 1e-12);
  EXPECT_NEAR(q_ratio_block_sparsity(x, p, QParam::one()), 1.9796, 1e-4);
  EXPECT_NEAR(q_ratio_block_sparsity(x, p, QParam::infinity()), 1.75, 1e-12);
  EXPECT_EQ(q_ratio_block_sparsity(Vector::Zero(4), p, QParam::finite(3.0)), 0.0);
}

TEST(QRatioSparsity, SingleBlockAndFlatSignals) {
  const BlockPartition p(12, 3);
  Vector one = Vector::Zero(12);
  one.segment(6, 3) = vec({1, -2, 0.5});
  Vector flat(12);
  for (Eigen::Index b = 0; b < 4; ++b) flat.segment(3 * b, 3) = vec({0, 0, b % 2 ? -2.0 : 2.0});
  for (double q : {0.0, 0.5, 1.0, 1.5, 2.0, 7.0, kInf}) {
    const auto qp = QParam::from_value(q);
    EXPECT_NEAR(q_ratio_block_sparsity(one, p, qp), 1.0, 1e-12) << q;
    EXPECT_NEAR(q_ratio_block_sparsity(flat, p, qp), 4.0, 1e-12) << q;
  }
}

TEST(QRatioSparsity, MatchesTextbookFormula) {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 4u}) {
    const BlockPartition part(8 * n, n);
    for (int t = 0; t < 50; ++t) {
      const Vector x = random_signal(rng, part);
      const auto r = oracle::norms(x, n);
      for (double q : {0.0, 0.3, 1.0, 1.7, 2.0, 5.0, 40.0, kInf}) {
        const double ref = oracle::kq_naive(r, q);
        EXPECT_NEAR(q_ratio_block_sparsity(x, part, QParam::from_value(q)), ref, 1e-9 * ref) << "q=" << q;
      }
    }
  }
}

TEST(QRatioSparsity, LimitContinuity) {
  Rng rng(5);
  const BlockPartition part(16, 2);
  for (int t = 0; t < 20; ++t) {
    const Vector x = random_signal(rng, part);
    const double k1 = q_ratio_block_sparsity(x, part, QParam::one());
    const double kinf = q_ratio_block_sparsity(x, part, QParam::infinity());
    EXPECT_NEAR(q_ratio_block_sparsity(x, part, QParam::finite(1.0 + 1e-8)), k1, 1e-6 * k1);
    EXPECT_NEAR(q_ratio_block_sparsity(x, part, QParam::finite(1.0 - 1e-8)), k1, 1e-6 * k1);
    EXPECT_NEAR(q_ratio_block_sparsity(x, part, QParam::finite(1e8)), kinf, 1e-6 * kinf);
  }
}

TEST(QRatioSparsity, Properties) {
  Rng rng(2024);
  const std::vector<double> qs{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0, 100.0, kInf};
  for (std::size_t n : {1u, 2u, 4u, 8u}) {
    const BlockPartition part(64, n);
    const double p = static_cast<double>(part.num_blocks());
    for (int t = 0; t < 250; ++t) {
      const Vector x = random_signal(rng, part);
      const double c = rng.normal() * std::exp(3.0 * rng.normal());
      double prev = kInf;
      for (double q : qs) {
        const auto qp = QParam::from_value(q);
        const double k = q_ratio_block_sparsity(x, part, qp);
        EXPECT_GE(k, 1.0);
        EXPECT_LE(k, p);
        EXPECT_NEAR(q_ratio_block_sparsity(Vector(c * x), part, qp), k, 1e-12 * k);
        EXPECT_LE(k, prev + 1e-10) << "non-increasing in q";
        prev = k;
      }
    }
  }
}

TEST(MixedNorm, OrderingInQ) {
  Rng rng(7);
  const BlockPartition part(24, 3);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_signal(rng, part);
    double prev = mixed_norm(x, part, QParam::one());
    for (double q : {1.5, 2.0, 3.0, 10.0, kInf}) {
      const double v = mixed_norm(x, part, QParam::from_value(q));
      EXPECT_LE(v, prev * (1.0 + 1e-14));
      prev = v;
    }
  }
}

TEST(BestBlockApprox, Examples) {
  const BlockPartition p(3, 1);
  const BlockVector x(vec({5, -3, 1}), p);
  EXPECT_DOUBLE_EQ(best_block_k_approx_error(x, 1), 4.0);
  EXPECT_DOUBLE_EQ(best_block_k_approx_error(x, 3), 0.0);
  EXPECT_DOUBLE_EQ(best_block_k_approx_error(x, 0), 9.0);
  EXPECT_THROW(best_block_k_approx_error(x, 4), ArgumentError);
}

TEST(BestBlockApprox, Decomposition) {
  Rng rng(3);
  const BlockPartition part(20, 2);
  for (int t = 0; t < 50; ++t) {
    const BlockVector x(random_signal(rng, part), part);
    for (std::size_t k = 0; k <= part.num_blocks(); ++k) {
      const double kept = mixed_norm(restrict_to_support(x, largest_blocks(x, k)), QParam::one());
      EXPECT_NEAR(best_block_k_approx_error(x, k) + kept, mixed_norm(x, QParam::one()), 1e-12 * (1.0 + kept));
    }
  }
}

TEST(RestrictToSupport, Examples) {
  const BlockPartition p(4, 2);
  const BlockVector x(vec({1, 2, 3, 4}), p);
  EXPECT_TRUE(restrict_to_support(x, BlockSupport({0}, p)).values().isApprox(vec({1, 2, 0, 0})));
  EXPECT_TRUE(restrict_to_support(x, BlockSupport({}, p)).values().isZero());
  EXPECT_TRUE(restrict_to_support(x, BlockSupport({0, 1}, p)).values().isApprox(x.values()));
  EXPECT_EQ(block_support(BlockVector(vec({0, 0, 0, 1}), p)).indices(), std::vector<std::size_t>{1});
}

TEST(VectorCsv, RoundTrip) {
  Rng rng(9);
  const BlockPartition part(12, 3);
  const BlockVector x(random_signal(rng, part), part);
  std::stringstream ss;
  write_vector_csv(ss, x);
  const BlockVector y = read_vector_csv(ss);
  EXPECT_EQ(y.partition(), part);
  EXPECT_EQ((y.values() - x.values()).cwiseAbs().maxCoeff(), 0.0);
}
