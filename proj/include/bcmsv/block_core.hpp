#pragma once

// Block-structured vectors and the mixed l2/lq quantities built on them.
//
// A signal of length N is split into p consecutive blocks of equal length n.
// Everything here works on the vector of per-block Euclidean norms, so the
// same routines serve BlockVector and the raw Eigen vectors used inside the
// solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "bcmsv/csv.hpp"
#include "bcmsv/errors.hpp"

namespace bcmsv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class BlockPartition {
 public:
  BlockPartition(std::size_t total_len, std::size_t block_len)
      : total_len_(total_len), block_len_(block_len) {
    if (block_len == 0 || total_len == 0) {
      throw ArgumentError("BlockPartition: N and n must be positive");
    }
    if (total_len % block_len != 0) {
      throw ArgumentError("BlockPartition: N=" + std::to_string(total_len) +
                          " is not a multiple of n=" + std::to_string(block_len));
    }
    num_blocks_ = total_len / block_len;
  }

  static BlockPartition from_blocks(std::size_t num_blocks, std::size_t block_len) {
    return BlockPartition(num_blocks * block_len, block_len);
  }

  std::size_t total_len() const noexcept { return total_len_; }
  std::size_t block_len() const noexcept { return block_len_; }
  std::size_t num_blocks() const noexcept { return num_blocks_; }
  std::size_t block_begin(std::size_t i) const noexcept { return i * block_len_; }

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;

 private:
  std::size_t total_len_;
  std::size_t block_len_;
  std::size_t num_blocks_ = 0;
};

/// Order q in [0, inf] with the limit cases 0, 1 and inf kept distinct.
class QParam {
 public:
  enum class Kind { Zero, One, Finite, Infinity };

  static QParam zero() { return QParam(Kind::Zero, 0.0); }
  static QParam one() { return QParam(Kind::One, 1.0); }
  static QParam infinity() { return QParam(Kind::Infinity, kInf); }

  static QParam finite(double q) {
    if (!(q > 0.0) || q == 1.0 || !std::isfinite(q)) {
      throw ArgumentError("QParam::finite requires q > 0, q != 1, q finite");
    }
    return QParam(Kind::Finite, q);
  }

  /// Maps 0, 1 and +inf onto their limit tags.
  static QParam from_value(double q) {
    if (q == 0.0) return zero();
    if (q == 1.0) return one();
    if (q == kInf) return infinity();
    return finite(q);
  }

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  bool is_infinite() const noexcept { return kind_ == Kind::Infinity; }

 private:
  QParam(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

/// Set of block indices (0-based, sorted, unique).
class BlockSupport {
 public:
  BlockSupport() = default;

  BlockSupport(std::vector<std::size_t> indices, const BlockPartition& partition)
      : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
      throw ArgumentError("BlockSupport: duplicate block index");
    }
    if (!indices_.empty() && indices_.back() >= partition.num_blocks()) {
      throw ArgumentError("BlockSupport: block index out of range");
    }
  }

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool contains(std::size_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

 private:
  std::vector<std::size_t> indices_;
};

class BlockVector {
 public:
  BlockVector(Vector values, BlockPartition partition)
      : values_(std::move(values)), partition_(partition) {
    if (static_cast<std::size_t>(values_.size()) != partition_.total_len()) {
      throw ArgumentError("BlockVector: length " + std::to_string(values_.size()) +
                          " does not match partition N=" +
                          std::to_string(partition_.total_len()));
    }
  }

  static BlockVector zeros(const BlockPartition& partition) {
    return BlockVector(Vector::Zero(static_cast<Eigen::Index>(partition.total_len())), partition);
  }

  const Vector& values() const noexcept { return values_; }
  const BlockPartition& partition() const noexcept { return partition_; }

  auto block(std::size_t i) const {
    return values_.segment(static_cast<Eigen::Index>(partition_.block_begin(i)),
                           static_cast<Eigen::Index>(partition_.block_len()));
  }

 private:
  Vector values_;
  BlockPartition partition_;
};

// ---------------------------------------------------------------------------
// Block norms and mixed norms

inline Vector block_norms(const Eigen::Ref<const Vector>& x, const BlockPartition& partition) {
  const auto p = static_cast<Eigen::Index>(partition.num_blocks());
  const auto n = static_cast<Eigen::Index>(partition.block_len());
  Vector r(p);
  for (Eigen::Index i = 0; i < p; ++i) r[i] = x.segment(i * n, n).norm();
  return r;
}

inline Vector block_norms(const BlockVector& x) { return block_norms(x.values(), x.partition()); }

/// lq (quasi-)norm of a non-negative vector of block norms.
inline double mixed_norm_of_norms(const Eigen::Ref<const Vector>& r, const QParam& q) {
  switch (q.kind()) {
    case QParam::Kind::Zero:
      return static_cast<double>((r.array() > 0.0).count());
    case QParam::Kind::One:
      return r.sum();
    case QParam::Kind::Infinity:
      return r.size() == 0 ? 0.0 : r.maxCoeff();
    case QParam::Kind::Finite: {
      if (r.size() == 0) return 0.0;
      const double m = r.maxCoeff();
      if (m == 0.0) return 0.0;
      const double qv = q.value();
      double acc = 0.0;
      for (double ri : r) {
        if (ri > 0.0) acc += std::pow(ri / m, qv);
      }
      return m * std::pow(acc, 1.0 / qv);
    }
  }
  return 0.0;
}

inline double mixed_norm(const Eigen::Ref<const Vector>& x, const BlockPartition& partition,
                         const QParam& q) {
  return mixed_norm_of_norms(block_norms(x, partition), q);
}

inline double mixed_norm(const BlockVector& x, const QParam& q) {
  return mixed_norm_of_norms(block_norms(x), q);
}

// ---------------------------------------------------------------------------
// q-ratio block sparsity

/// k_q evaluated on a vector of block norms. Returns 0 for the zero vector.
///
/// Finite q is evaluated as exp of the Renyi entropy of pi_i = r_i / sum(r).
/// Near q = 1 the sum of pi_i^q - 1 is formed with expm1 so that the limit is
/// approached smoothly; elsewhere the sum is scaled by the largest pi.
inline double q_ratio_sparsity_of_norms(const Eigen::Ref<const Vector>& r, const QParam& q) {
  const double total = r.sum();
  if (!(total > 0.0)) return 0.0;
  const double support = static_cast<double>((r.array() > 0.0).count());
  double k = 0.0;
  switch (q.kind()) {
    case QParam::Kind::Zero:
      return support;
    case QParam::Kind::Infinity:
      k = total / r.maxCoeff();
      break;
    case QParam::Kind::One: {
      double h = 0.0;
      for (double ri : r) {
        if (ri > 0.0) {
          const double pi = ri / total;
          h -= pi * std::log(pi);
        }
      }
      k = std::exp(h);
      break;
    }
    case QParam::Kind::Finite: {
      const double qv = q.value();
      double log_sum = 0.0;
      if (std::abs(qv - 1.0) < 0.5) {
        double s = 0.0;
        for (double ri : r) {
          if (ri > 0.0) {
            const double pi = ri / total;
            s += pi * std::expm1((qv - 1.0) * std::log(pi));
          }
        }
        log_sum = std::log1p(s);
      } else {
        const double pmax = r.maxCoeff() / total;
        double s = 0.0;
        for (double ri : r) {
          if (ri > 0.0) s += std::pow(ri / total / pmax, qv);
        }
        log_sum = qv * std::log(pmax) + std::log(s);
      }
      k = std::exp(log_sum / (1.0 - qv));
      break;
    }
  }
  return std::clamp(k, 1.0, support);
}

inline double q_ratio_block_sparsity(const Eigen::Ref<const Vector>& x,
                                     const BlockPartition& partition, const QParam& q) {
  return q_ratio_sparsity_of_norms(block_norms(x, partition), q);
}

inline double q_ratio_block_sparsity(const BlockVector& x, const QParam& q) {
  return q_ratio_sparsity_of_norms(block_norms(x), q);
}

// ---------------------------------------------------------------------------
// Supports and best k-block approximation

inline BlockSupport block_support(const BlockVector& x) {
  const Vector r = block_norms(x);
  std::vector<std::size_t> idx;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] != 0.0) idx.push_back(static_cast<std::size_t>(i));
  }
  return BlockSupport(std::move(idx), x.partition());
}

/// Indices of the k blocks of largest norm (ties broken by lower index).
inline BlockSupport largest_blocks(const BlockVector& x, std::size_t k) {
  const std::size_t p = x.partition().num_blocks();
  if (k > p) throw ArgumentError("largest_blocks: k exceeds number of blocks");
  const Vector r = block_norms(x);
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r[static_cast<Eigen::Index>(a)] > r[static_cast<Eigen::Index>(b)];
  });
  order.resize(k);
  return BlockSupport(std::move(order), x.partition());
}

/// phi_k(x): l2/l1 distance to the nearest block k-sparse vector, i.e. the sum
/// of the p - k smallest block norms.
inline double best_block_k_approx_error(const BlockVector& x, std::size_t k) {
  const std::size_t p = x.partition().num_blocks();
  if (k > p) {
    throw ArgumentError("best_block_k_approx_error: k=" + std::to_string(k) +
                        " outside [0, " + std::to_string(p) + "]");
  }
  Vector r = block_norms(x);
  std::sort(r.begin(), r.end());
  return r.head(static_cast<Eigen::Index>(p - k)).sum();
}

inline BlockVector restrict_to_support(const BlockVector& x, const BlockSupport& support) {
  const auto& part = x.partition();
  if (!support.indices().empty() && support.indices().back() >= part.num_blocks()) {
    throw ArgumentError("restrict_to_support: support does not fit partition");
  }
  Vector out = Vector::Zero(x.values().size());
  const auto n = static_cast<Eigen::Index>(part.block_len());
  for (std::size_t i : support.indices()) {
    const auto b = static_cast<Eigen::Index>(part.block_begin(i));
    out.segment(b, n) = x.values().segment(b, n);
  }
  return BlockVector(std::move(out), part);
}

// ---------------------------------------------------------------------------
// CSV: first line "N,n,p", second line the N values.

inline void write_vector_csv(std::ostream& os, const BlockVector& x) {
  const auto& part = x.partition();
  os << part.total_len() << ',' << part.block_len() << ',' << part.num_blocks() << '\n';
  for (Eigen::Index i = 0; i < x.values().size(); ++i) {
    if (i) os << ',';
    os << csv::format_double(x.values()[i]);
  }
  os << '\n';
}

inline BlockVector read_vector_csv(std::istream& is) {
  std::string header;
  std::string body;
  if (!std::getline(is, header) || !std::getline(is, body)) {
    throw ArgumentError("read_vector_csv: expected header and value lines");
  }
  const auto h = csv::split(header);
  if (h.size() != 3) throw ArgumentError("read_vector_csv: header must be N,n,p");
  const auto total = csv::parse_int<std::size_t>(h[0]);
  const auto block = csv::parse_int<std::size_t>(h[1]);
  const auto blocks = csv::parse_int<std::size_t>(h[2]);
  BlockPartition part(total, block);
  if (part.num_blocks() != blocks) throw ArgumentError("read_vector_csv: N != n*p");
  const auto fields = csv::split(body);
  if (fields.size() != total) throw ArgumentError("read_vector_csv: wrong number of values");
  Vector v(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) v[static_cast<Eigen::Index>(i)] = csv::parse_double(fields[i]);
  return BlockVector(std::move(v), part);
}

}  // namespace bcmsv
