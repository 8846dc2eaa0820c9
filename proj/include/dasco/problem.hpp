#pragma once

// Compositional problem abstraction:
//
//   h(x) = (1/n) sum_j f_j( (1/n) sum_j g_j(x) ),
//
// where agent j only sees stochastic samples of its private inner map g_j
// (value in R^p, Jacobian in R^{d x p}) and of the gradient of its private
// outer function f_j.

#include <dasco/core.hpp>
#include <dasco/random.hpp>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace dasco {

/// Batch-averaged stochastic inner oracle output at one point.
struct InnerSample {
  Vector value;     // length p
  Matrix jacobian;  // d x p; column c is the gradient of component c
};

class CompositionalProblem {
 public:
  virtual ~CompositionalProblem() = default;

  virtual int agents() const = 0;
  virtual int dim() const = 0;
  virtual int inner_dim() const = 0;

  /// Draws one batch of inner randomness for agent j and evaluates G_j(.;phi)
  /// and its Jacobian at every point of `points` with that same draw.
  virtual std::vector<InnerSample> sample_inner(int j, std::span<const Vector> points, int batch,
                                                Rng& rng) const = 0;

  /// Stochastic outer gradient. The default is the exact gradient.
  virtual Vector sample_outer_grad(int j, const Vector& y, Rng& rng) const {
    (void)rng;
    return outer_grad(j, y);
  }

  virtual Vector inner_mean(int j, const Vector& x) const = 0;
  virtual Matrix inner_jacobian_mean(int j, const Vector& x) const = 0;
  virtual double outer_value(int j, const Vector& y) const = 0;
  virtual Vector outer_grad(int j, const Vector& y) const = 0;

  InnerSample sample_inner(int j, const Vector& x, int batch, Rng& rng) const {
    auto out = sample_inner(j, std::span<const Vector>(&x, 1), batch, rng);
    return std::move(out.front());
  }

  Vector aggregate_inner(const Vector& x) const {
    Vector acc = Vector::Zero(inner_dim());
    for (int j = 0; j < agents(); ++j) acc += inner_mean(j, x);
    return acc / agents();
  }

  Matrix aggregate_jacobian(const Vector& x) const {
    Matrix acc = Matrix::Zero(dim(), inner_dim());
    for (int j = 0; j < agents(); ++j) acc += inner_jacobian_mean(j, x);
    return acc / agents();
  }

  /// h(x). Subclasses with a closed form may override; the chain-rule
  /// evaluation stays reachable through composed_objective().
  virtual double full_objective(const Vector& x) const { return composed_objective(x); }
  virtual Vector full_gradient(const Vector& x) const { return composed_gradient(x); }

  double composed_objective(const Vector& x) const {
    check_point(x);
    const Vector gbar = aggregate_inner(x);
    double acc = 0.0;
    for (int j = 0; j < agents(); ++j) acc += outer_value(j, gbar);
    return acc / agents();
  }

  Vector composed_gradient(const Vector& x) const {
    check_point(x);
    const Vector gbar = aggregate_inner(x);
    Vector outer = Vector::Zero(inner_dim());
    for (int j = 0; j < agents(); ++j) outer += outer_grad(j, gbar);
    outer /= agents();
    return aggregate_jacobian(x) * outer;
  }

 protected:
  void check_agent(int j) const {
    detail::require_dims(j >= 0 && j < agents(), "agent index out of range");
  }
  void check_point(const Vector& x) const {
    detail::require_dims(x.size() == dim(), "decision vector has wrong length");
    if (!x.allFinite()) throw NumericalError("non-finite decision vector");
  }
  void check_inner_point(const Vector& y) const {
    detail::require_dims(y.size() == inner_dim(), "inner vector has wrong length");
  }
};

/// Synthetic problem with affine inner maps and quadratic outer functions:
///   g_j(x) = A_j x + c_j,   f_j(y) = 1/2 ||y - t_j||^2.
/// Optional additive Gaussian noise on the inner value, the inner Jacobian,
/// and the outer gradient exercises every randomness hook of the framework.
struct LinearQuadraticNoise {
  double inner_value = 0.0;
  double inner_jacobian = 0.0;
  double outer_grad = 0.0;
};

class LinearQuadraticProblem final : public CompositionalProblem {
 public:
  using CompositionalProblem::sample_inner;
  using Noise = LinearQuadraticNoise;

  LinearQuadraticProblem(std::vector<Matrix> maps, std::vector<Vector> offsets,
                         std::vector<Vector> targets, Noise noise = {})
      : maps_(std::move(maps)),
        offsets_(std::move(offsets)),
        targets_(std::move(targets)),
        noise_(noise) {
    detail::require(!maps_.empty(), "at least one agent is required");
    detail::require_dims(offsets_.size() == maps_.size() && targets_.size() == maps_.size(),
                         "per-agent data must have one entry per agent");
    const auto p = maps_.front().rows();
    const auto d = maps_.front().cols();
    detail::require_dims(p > 0 && d > 0, "empty inner map");
    for (std::size_t j = 0; j < maps_.size(); ++j) {
      detail::require_dims(maps_[j].rows() == p && maps_[j].cols() == d, "inner map shape mismatch");
      detail::require_dims(offsets_[j].size() == p && targets_[j].size() == p,
                           "offset/target length mismatch");
    }
    detail::require(noise_.inner_value >= 0 && noise_.inner_jacobian >= 0 && noise_.outer_grad >= 0,
                    "noise levels must be nonnegative");
  }

  /// g(x) = x, f(y) = y^2 / 2 on a single agent.
  static LinearQuadraticProblem scalar() {
    return LinearQuadraticProblem({Matrix::Identity(1, 1)}, {Vector::Zero(1)}, {Vector::Zero(1)});
  }

  int agents() const override { return static_cast<int>(maps_.size()); }
  int dim() const override { return static_cast<int>(maps_.front().cols()); }
  int inner_dim() const override { return static_cast<int>(maps_.front().rows()); }

  std::vector<InnerSample> sample_inner(int j, std::span<const Vector> points, int batch,
                                        Rng& rng) const override {
    check_agent(j);
    detail::require(batch >= 1, "batch must be at least 1");
    Vector value_noise = Vector::Zero(inner_dim());
    Matrix jac_noise = Matrix::Zero(dim(), inner_dim());
    if (noise_.inner_value > 0 || noise_.inner_jacobian > 0) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < inner_dim(); ++c) value_noise[c] += noise_.inner_value * normal(rng);
        for (Eigen::Index k = 0; k < jac_noise.size(); ++k)
          jac_noise.data()[k] += noise_.inner_jacobian * normal(rng);
      }
      value_noise /= batch;
      jac_noise /= batch;
    }
    std::vector<InnerSample> out;
    out.reserve(points.size());
    for (const auto& x : points) {
      check_point(x);
      out.push_back({inner_mean(j, x) + value_noise, maps_[j].transpose() + jac_noise});
    }
    return out;
  }

  Vector sample_outer_grad(int j, const Vector& y, Rng& rng) const override {
    Vector g = outer_grad(j, y);
    if (noise_.outer_grad > 0) {
      std::normal_distribution<double> normal(0.0, noise_.outer_grad);
      for (int c = 0; c < g.size(); ++c) g[c] += normal(rng);
    }
    return g;
  }

  Vector inner_mean(int j, const Vector& x) const override {
    check_agent(j);
    return maps_[j] * x + offsets_[j];
  }

  Matrix inner_jacobian_mean(int j, const Vector& x) const override {
    check_agent(j);
    check_point(x);
    return maps_[j].transpose();
  }

  double outer_value(int j, const Vector& y) const override {
    check_agent(j);
    check_inner_point(y);
    return 0.5 * (y - targets_[j]).squaredNorm();
  }

  Vector outer_grad(int j, const Vector& y) const override {
    check_agent(j);
    check_inner_point(y);
    return y - targets_[j];
  }

 private:
  std::vector<Matrix> maps_;
  std::vector<Vector> offsets_;
  std::vector<Vector> targets_;
  Noise noise_;
};

/// Collapses an n-agent problem into one agent that sees the aggregate inner
/// map and the averaged outer function. Each inner sample pools `batch` draws
/// from every agent's distribution, i.e. n*batch draws in total.
class PooledProblem final : public CompositionalProblem {
 public:
  using CompositionalProblem::sample_inner;
  explicit PooledProblem(const CompositionalProblem& base) : base_(base) {}

  int agents() const override { return 1; }
  int dim() const override { return base_.dim(); }
  int inner_dim() const override { return base_.inner_dim(); }

  std::vector<InnerSample> sample_inner(int j, std::span<const Vector> points, int batch,
                                        Rng& rng) const override {
    check_agent(j);
    std::vector<InnerSample> acc;
    for (int a = 0; a < base_.agents(); ++a) {
      auto part = base_.sample_inner(a, points, batch, rng);
      if (acc.empty()) {
        acc = std::move(part);
        continue;
      }
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i].value += part[i].value;
        acc[i].jacobian += part[i].jacobian;
      }
    }
    if (base_.agents() > 1) {
      for (auto& s : acc) {
        s.value /= base_.agents();
        s.jacobian /= base_.agents();
      }
    }
    return acc;
  }

  Vector sample_outer_grad(int j, const Vector& y, Rng& rng) const override {
    check_agent(j);
    Vector acc = Vector::Zero(inner_dim());
    for (int a = 0; a < base_.agents(); ++a) acc += base_.sample_outer_grad(a, y, rng);
    return acc / base_.agents();
  }

  Vector inner_mean(int j, const Vector& x) const override {
    check_agent(j);
    return base_.aggregate_inner(x);
  }

  Matrix inner_jacobian_mean(int j, const Vector& x) const override {
    check_agent(j);
    return base_.aggregate_jacobian(x);
  }

  double outer_value(int j, const Vector& y) const override {
    check_agent(j);
    double acc = 0.0;
    for (int a = 0; a < base_.agents(); ++a) acc += base_.outer_value(a, y);
    return acc / base_.agents();
  }

  Vector outer_grad(int j, const Vector& y) const override {
    check_agent(j);
    Vector acc = Vector::Zero(inner_dim());
    for (int a = 0; a < base_.agents(); ++a) acc += base_.outer_grad(a, y);
    return acc / base_.agents();
  }

  double full_objective(const Vector& x) const override { return base_.full_objective(x); }
  Vector full_gradient(const Vector& x) const override { return base_.full_gradient(x); }

  const CompositionalProblem& base() const { return base_; }

 private:
  const CompositionalProblem& base_;
};

}  // namespace dasco
