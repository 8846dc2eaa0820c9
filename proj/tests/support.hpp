#pragma once

// Fixtures and independent reference computations shared by the test suites.

#include <dasco/dasco.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <vector>

namespace dasco::testing {

/// n = 1, d = 1, S = 1 instance with phi = 1, P = [1] and a constant reward
/// mean; with discount 0 and lambda 1, h(x) = (x - r)^2 / 2 + x^2 / 2.
inline RLInstance tiny_instance(double reward = 1.0, double discount = 0.0, double lambda = 1.0) {
  return RLInstance(1, Matrix::Ones(1, 1), Matrix::Ones(1, 1), {Matrix::Constant(1, 1, reward)},
                    discount, lambda, 0);
}

inline RLInstance small_instance(std::uint64_t seed, int n = 3, int d = 4, int states = 6) {
  RLSpec spec;
  spec.agents = n;
  spec.dim = d;
  spec.states = states;
  spec.seed = seed;
  return generate_instance(spec);
}

inline Vector random_vector(Eigen::Index m, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(m);
  for (Eigen::Index i = 0; i < m; ++i) v[i] = normal(rng);
  return v;
}

inline BlockMatrix random_block(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  BlockMatrix b(rows, cols);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  return b;
}

/// Central differences of a scalar function.
inline Vector finite_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                double step = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

/// Dense reference for ||W - J||_2 via a symmetric-agnostic SVD.
inline double dense_spectral_norm(const Matrix& w) {
  const auto n = w.rows();
  const Matrix c = w - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::JacobiSVD<Matrix> svd(c);
  return svd.singularValues()(0);
}

/// Brute-force h(x) straight from the problem definition, summing every
/// state and successor explicitly. Independent of the library's matrix forms.
inline double brute_force_objective(const RLInstance& inst, const Vector& x) {
  const int n = inst.agents();
  const int S = inst.states();
  const int d = inst.dim();
  const Matrix& phi = inst.features();
  const Matrix& P = inst.transitions();
  std::vector<double> mean_g(S, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int s = 0; s < S; ++s) {
      double e = 0.0;
      for (int t = 0; t < S; ++t) {
        double next = 0.0;
        for (int c = 0; c < d; ++c) next += phi(t, c) * x[c];
        e += P(s, t) * (inst.reward_means()[j](s, t) + inst.discount() * next);
      }
      mean_g[s] += e / n;
    }
  }
  double sum = 0.0;
  for (int s = 0; s < S; ++s) {
    double v = 0.0;
    for (int c = 0; c < d; ++c) v += phi(s, c) * x[c];
    sum += (v - mean_g[s]) * (v - mean_g[s]);
  }
  return sum / (2.0 * S) + 0.5 * inst.regularizer() * x.squaredNorm();
}

}  // namespace dasco::testing
