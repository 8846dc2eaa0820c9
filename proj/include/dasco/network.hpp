#pragma once

// Doubly stochastic gossip matrices and their consensus rate.

#include <dasco/core.hpp>
#include <dasco/random.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dasco {

struct StochasticityReport {
  double max_row_deviation = 0.0;
  double max_col_deviation = 0.0;
  double min_entry = 0.0;
  double tolerance = 1e-12;

  bool nonnegative() const { return min_entry >= 0.0; }
  bool ok() const {
    return nonnegative() && max_row_deviation <= tolerance && max_col_deviation <= tolerance;
  }

  std::string describe() const {
    std::ostringstream os;
    if (ok()) return "doubly stochastic";
    if (max_row_deviation > tolerance) os << "row sums deviate by " << max_row_deviation << "; ";
    if (max_col_deviation > tolerance) os << "column sums deviate by " << max_col_deviation << "; ";
    if (!nonnegative()) os << "negative entry " << min_entry << "; ";
    auto s = os.str();
    return s.substr(0, s.size() - 2);
  }
};

inline StochasticityReport validate_doubly_stochastic(const Matrix& w, double tolerance = 1e-12) {
  detail::require_dims(w.rows() == w.cols() && w.rows() > 0, "weight matrix must be square");
  StochasticityReport rep;
  rep.tolerance = tolerance;
  rep.max_row_deviation = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.max_col_deviation = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  rep.min_entry = w.minCoeff();
  return rep;
}

/// ||W - (1/n) 1 1^T||_2 by power iteration on (W - J)(W - J)^T.
inline double spectral_gap(const Matrix& w, double rel_tol = 1e-10, int max_iter = 100000) {
  detail::require_dims(w.rows() == w.cols() && w.rows() > 0, "weight matrix must be square");
  const auto n = w.rows();
  const Matrix centered = w - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix gram = centered * centered.transpose();
  if (gram.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  Rng rng(0x5eed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();

  double prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector next = gram * v;
    const double lambda = v.dot(next);
    const double len = next.norm();
    if (len == 0.0) return 0.0;
    v = next / len;
    if (it > 0 && std::abs(lambda - prev) <= rel_tol * std::abs(lambda))
      return std::sqrt(std::max(lambda, 0.0));
    prev = lambda;
  }
  throw NumericalError("spectral gap power iteration did not converge");
}

/// Alternating row/column normalisation until both deviate by at most `tol`.
inline Matrix sinkhorn_balance(Matrix w, int max_passes = 1000, double tol = 1e-12) {
  for (int pass = 0; pass < max_passes; ++pass) {
    if (validate_doubly_stochastic(w, tol).ok()) return w;
    if (w.minCoeff() < 0.0 || (w.rowwise().sum().array() <= 0.0).any() ||
        (w.colwise().sum().array() <= 0.0).any())
      throw TopologyError("Sinkhorn balancing needs a nonnegative matrix without empty rows or columns");
    for (Eigen::Index r = 0; r < w.rows(); ++r) w.row(r) /= w.row(r).sum();
    for (Eigen::Index c = 0; c < w.cols(); ++c) w.col(c) /= w.col(c).sum();
  }
  if (validate_doubly_stochastic(w, tol).ok()) return w;
  throw TopologyError("Sinkhorn balancing did not converge");
}

class MixingMatrix {
 public:
  explicit MixingMatrix(Matrix w, double tolerance = 1e-12) : w_(std::move(w)) {
    const auto rep = validate_doubly_stochastic(w_, tolerance);
    if (!rep.ok()) throw TopologyError("weight matrix is not doubly stochastic: " + rep.describe());
    const auto n = w_.rows();
    support_.resize(n);
    neighbors_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (w_(i, j) > 0.0) {
          support_[i].push_back(static_cast<int>(j));
          if (j != i) neighbors_[i].push_back(static_cast<int>(j));
        }
      }
    }
    out_degree_.assign(n, 0);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j && w_(i, j) > 0.0) ++out_degree_[j];
    for (int deg : out_degree_) edges_ += deg;
    rho_ = spectral_gap(w_);
  }

  static MixingMatrix trivial() { return MixingMatrix(Matrix::Identity(1, 1)); }

  int size() const { return static_cast<int>(w_.rows()); }
  const Matrix& weights() const { return w_; }
  double operator()(int i, int j) const { return w_(i, j); }
  double rho() const { return rho_; }

  /// Indices j != i with w_ij > 0.
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

  /// Number of ordered pairs (i, j), i != j, over which a message travels.
  int directed_edge_count() const { return edges_; }

  /// How many agents receive agent j's message (column support minus self).
  int out_degree(int j) const { return out_degree_[j]; }

  /// (W kron I) applied to a block-stacked variable (one agent per row).
  BlockMatrix mix(const BlockMatrix& v) const {
    detail::require_dims(v.rows() == w_.rows(), "block variable has wrong agent count");
    BlockMatrix out = BlockMatrix::Zero(v.rows(), v.cols());
    for (int i = 0; i < size(); ++i)
      for (int j : support_[i]) out.row(i) += w_(i, j) * v.row(j);
    return out;
  }

  void write_csv(std::ostream& os) const {
    for (Eigen::Index i = 0; i < w_.rows(); ++i) {
      for (Eigen::Index j = 0; j < w_.cols(); ++j) {
        if (j) os << ',';
        os << detail::format_double(w_(i, j));
      }
      os << '\n';
    }
  }

 private:
  Matrix w_;
  std::vector<std::vector<int>> support_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> out_degree_;
  int edges_ = 0;
  double rho_ = 0.0;
};

/// Ring: 1/2 on the diagonal, 1/4 to each of the two ring neighbours.
inline MixingMatrix ring_weights(int n) {
  if (n < 3) throw TopologyError("ring topology needs at least 3 nodes");
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    w(i, i) = 0.5;
    w(i, (i + 1) % n) = 0.25;
    w(i, (i + n - 1) % n) = 0.25;
  }
  return MixingMatrix(std::move(w));
}

/// Exponential graph: node i talks to i + 2^m (mod n) for 2^m <= n-1, links are
/// made symmetric, and each row averages uniformly over itself and its
/// distinct neighbours. Sinkhorn balancing repairs column sums if needed.
inline MixingMatrix exponential_weights(int n) {
  if (n < 2) throw TopologyError("exponential topology needs at least 2 nodes");
  std::vector<std::set<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (long long hop = 1; hop <= n - 1; hop *= 2) {
      const int j = static_cast<int>((i + hop) % n);
      if (j == i) continue;
      adj[i].insert(j);
      adj[j].insert(i);
    }
  }
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double share = 1.0 / static_cast<double>(adj[i].size() + 1);
    w(i, i) = share;
    for (int j : adj[i]) w(i, j) = share;
  }
  if (!validate_doubly_stochastic(w).ok()) w = sinkhorn_balance(std::move(w));
  return MixingMatrix(std::move(w));
}

}  // namespace dasco
