#pragma once

// Multi-agent policy evaluation with linear value features, posed as a
// compositional problem. With features phi_s (rows of Phi) and transition
// matrix P,
//
//   g_j(x) = ( x, E_{s'}[ r^(j)_{s,s'} + discount * phi_{s'}^T x | s ]_{s=1..S} )
//   f_j(y) = 1/(2S) sum_s (phi_s^T y(1:d) - y(d+s))^2 + lambda/2 ||y(1:d)||^2
//
// so p = d + S and h(x) = 1/(2S) ||A x - b||^2 + lambda/2 ||x||^2 with
// A = Phi - discount * P Phi and b the agent-averaged expected reward.

#include <dasco/core.hpp>
#include <dasco/problem.hpp>
#include <dasco/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dasco {

struct RLSpec {
  int agents = 6;
  int dim = 32;
  int states = 100;
  double discount = 0.95;
  double regularizer = 1.0;
  std::uint64_t seed = 0;
};

class RLInstance final : public CompositionalProblem {
 public:
  using CompositionalProblem::sample_inner;
  static constexpr double kRewardStd = 1.0;

  RLInstance(int agents, Matrix features, Matrix transitions, std::vector<Matrix> reward_means,
             double discount, double regularizer, std::uint64_t seed = 0)
      : agents_(agents),
        features_(std::move(features)),
        transitions_(std::move(transitions)),
        reward_means_(std::move(reward_means)),
        discount_(discount),
        regularizer_(regularizer),
        seed_(seed) {
    detail::require(agents_ >= 1, "agent count must be at least 1");
    detail::require(features_.rows() >= 1 && features_.cols() >= 1, "features must be non-empty");
    detail::require(discount_ >= 0.0 && discount_ < 1.0, "discount must lie in [0, 1)");
    detail::require(regularizer_ >= 0.0, "regularizer must be nonnegative");
    const auto S = features_.rows();
    detail::require_dims(transitions_.rows() == S && transitions_.cols() == S,
                         "transition matrix must be S x S");
    detail::require_dims(static_cast<int>(reward_means_.size()) == agents_,
                         "need one reward-mean matrix per agent");
    for (const auto& r : reward_means_)
      detail::require_dims(r.rows() == S && r.cols() == S, "reward means must be S x S");
    if (!features_.allFinite() || !transitions_.allFinite())
      throw ConfigError("instance data must be finite");
    for (Eigen::Index s = 0; s < S; ++s) {
      if (transitions_.row(s).minCoeff() < 0.0)
        throw ConfigError("transition probabilities must be nonnegative");
      if (std::abs(transitions_.row(s).sum() - 1.0) > 1e-12)
        throw ConfigError("transition row " + std::to_string(s) + " does not sum to 1");
    }
    precompute();
  }

  int agents() const override { return agents_; }
  int dim() const override { return static_cast<int>(features_.cols()); }
  int inner_dim() const override { return dim() + states(); }
  int states() const { return static_cast<int>(features_.rows()); }

  const Matrix& features() const { return features_; }
  const Matrix& transitions() const { return transitions_; }
  const std::vector<Matrix>& reward_means() const { return reward_means_; }
  double discount() const { return discount_; }
  double regularizer() const { return regularizer_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<InnerSample> sample_inner(int j, std::span<const Vector> points, int batch,
                                        Rng& rng) const override {
    check_agent(j);
    detail::require(batch >= 1, "batch must be at least 1");
    const int d = dim();
    const int S = states();
    // Per state: average sampled reward and average successor feature.
    Vector reward = Vector::Zero(S);
    Matrix next_feature = Matrix::Zero(S, d);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, kRewardStd);
    const Matrix& means = reward_means_[j];
    for (int b = 0; b < batch; ++b) {
      for (int s = 0; s < S; ++s) {
        const int next = sample_successor(s, uniform(rng));
        reward[s] += means(s, next) + noise(rng);
        next_feature.row(s) += features_.row(next);
      }
    }
    reward /= batch;
    next_feature /= batch;

    Matrix jac(d, d + S);
    jac.leftCols(d).setIdentity();
    jac.rightCols(S) = discount_ * next_feature.transpose();

    std::vector<InnerSample> out;
    out.reserve(points.size());
    for (const auto& x : points) {
      check_point(x);
      Vector value(d + S);
      value.head(d) = x;
      value.tail(S) = reward + discount_ * (next_feature * x);
      out.push_back({std::move(value), jac});
    }
    return out;
  }

  Vector inner_mean(int j, const Vector& x) const override {
    check_agent(j);
    check_point(x);
    Vector value(inner_dim());
    value.head(dim()) = x;
    value.tail(states()) = expected_reward_.row(j).transpose() + discount_ * (pphi_ * x);
    return value;
  }

  Matrix inner_jacobian_mean(int j, const Vector& x) const override {
    check_agent(j);
    check_point(x);
    Matrix jac(dim(), inner_dim());
    jac.leftCols(dim()).setIdentity();
    jac.rightCols(states()) = discount_ * pphi_.transpose();
    return jac;
  }

  double outer_value(int j, const Vector& y) const override {
    check_agent(j);
    check_inner_point(y);
    const auto head = y.head(dim());
    const Vector residual = features_ * head - y.tail(states());
    return residual.squaredNorm() / (2.0 * states()) + 0.5 * regularizer_ * head.squaredNorm();
  }

  Vector outer_grad(int j, const Vector& y) const override {
    check_agent(j);
    check_inner_point(y);
    const auto head = y.head(dim());
    const Vector residual = (features_ * head - y.tail(states())) / states();
    Vector grad(inner_dim());
    grad.head(dim()) = features_.transpose() * residual + regularizer_ * head;
    grad.tail(states()) = -residual;
    return grad;
  }

  double full_objective(const Vector& x) const override {
    check_point(x);
    return (td_ * x - mean_reward_).squaredNorm() / (2.0 * states()) +
           0.5 * regularizer_ * x.squaredNorm();
  }

  Vector full_gradient(const Vector& x) const override {
    check_point(x);
    return td_.transpose() * (td_ * x - mean_reward_) / states() + regularizer_ * x;
  }

  /// Exact minimiser of h via the normal equations of the ridge problem.
  Vector solve_optimal() const {
    Matrix normal = td_.transpose() * td_ / states();
    normal.diagonal().array() += regularizer_;
    const Vector rhs = td_.transpose() * mean_reward_ / states();
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
      throw NumericalError("normal equations are singular; use a positive regularizer");
    return llt.solve(rhs);
  }

  /// Agent-averaged expected one-step reward per state.
  const Vector& mean_reward() const { return mean_reward_; }

 private:
  void precompute() {
    const int S = states();
    cdf_.resize(S, S);
    for (int s = 0; s < S; ++s) {
      double acc = 0.0;
      for (int t = 0; t < S; ++t) {
        acc += transitions_(s, t);
        cdf_(s, t) = acc;
      }
    }
    pphi_ = transitions_ * features_;
    td_ = features_ - discount_ * pphi_;
    expected_reward_.resize(agents_, S);
    for (int j = 0; j < agents_; ++j)
      expected_reward_.row(j) = transitions_.cwiseProduct(reward_means_[j]).rowwise().sum().transpose();
    mean_reward_ = expected_reward_.colwise().mean().transpose();
  }

  int sample_successor(int s, double u) const {
    const double* row = cdf_.data() + static_cast<Eigen::Index>(s) * cdf_.cols();
    const double* end = row + cdf_.cols();
    const double* hit = std::upper_bound(row, end, u * row[cdf_.cols() - 1]);
    if (hit == end) --hit;
    return static_cast<int>(hit - row);
  }

  int agents_;
  Matrix features_;
  Matrix transitions_;
  std::vector<Matrix> reward_means_;
  double discount_;
  double regularizer_;
  std::uint64_t seed_;

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cdf_;
  Matrix pphi_;
  Matrix td_;
  Matrix expected_reward_;
  Vector mean_reward_;
};

/// Uniform random features and reward means on [0,1], transition rows drawn
/// uniform and normalised. Deterministic in `spec.seed`.
inline RLInstance generate_instance(const RLSpec& spec) {
  detail::require(spec.agents >= 1, "agent count must be at least 1");
  detail::require(spec.dim >= 1, "dimension must be at least 1");
  detail::require(spec.states >= 1, "state count must be at least 1");
  detail::require(spec.discount > 0.0 && spec.discount < 1.0, "discount must lie in (0, 1)");
  detail::require(spec.regularizer >= 0.0, "regularizer must be nonnegative");

  Rng rng = child_rng(spec.seed, 0, 0, Stream::kInstance);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int S = spec.states;

  Matrix features(S, spec.dim);
  for (int s = 0; s < S; ++s)
    for (int c = 0; c < spec.dim; ++c) features(s, c) = uniform(rng);

  Matrix transitions(S, S);
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < S; ++t) transitions(s, t) = uniform(rng);
    const double total = transitions.row(s).sum();
    if (total > 0.0)
      transitions.row(s) /= total;
    else
      transitions.row(s).setConstant(1.0 / S);
  }

  std::vector<Matrix> rewards(spec.agents, Matrix(S, S));
  for (auto& r : rewards)
    for (int s = 0; s < S; ++s)
      for (int t = 0; t < S; ++t) r(s, t) = uniform(rng);

  return RLInstance(spec.agents, std::move(features), std::move(transitions), std::move(rewards),
                    spec.discount, spec.regularizer, spec.seed);
}

// ---------------------------------------------------------------------------
// JSON persistence

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                               const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw DimensionError(std::string(what) + ": wrong row count");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DimensionError(std::string(what) + ": wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const RLInstance& inst) {
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& r : inst.reward_means()) rewards.push_back(detail::matrix_to_json(r));
  return {
      {"agents", inst.agents()},
      {"dim", inst.dim()},
      {"states", inst.states()},
      {"discount", inst.discount()},
      {"regularizer", inst.regularizer()},
      {"seed", inst.seed()},
      {"features", detail::matrix_to_json(inst.features())},
      {"transitions", detail::matrix_to_json(inst.transitions())},
      {"reward_means", std::move(rewards)},
  };
}

inline RLInstance instance_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("agents").get<int>();
    const int d = j.at("dim").get<int>();
    const int S = j.at("states").get<int>();
    detail::require(n >= 1 && d >= 1 && S >= 1, "instance dimensions must be positive");
    const auto& rj = j.at("reward_means");
    if (!rj.is_array() || static_cast<int>(rj.size()) != n)
      throw DimensionError("reward_means: wrong agent count");
    std::vector<Matrix> rewards;
    for (const auto& r : rj) rewards.push_back(detail::matrix_from_json(r, S, S, "reward_means"));
    return RLInstance(n, detail::matrix_from_json(j.at("features"), S, d, "features"),
                      detail::matrix_from_json(j.at("transitions"), S, S, "transitions"),
                      std::move(rewards), j.at("discount").get<double>(),
                      j.at("regularizer").get<double>(), j.value("seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed instance: ") + e.what());
  }
}

inline void save_instance(const RLInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(inst).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline RLInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace dasco
