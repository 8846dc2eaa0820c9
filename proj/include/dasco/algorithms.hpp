#pragma once

// Synchronous-round state transitions for the decentralized aggregative
// compositional gradient method, its compressed-communication variant, and a
// single-node pooled baseline.
//
// Each agent i keeps a decision x_i, hybrid variance-reduced estimates G_i of
// g_i(x_i) and Ghat_i of its Jacobian, and dynamic-average-consensus trackers
// y_i, z_i of the network averages of those estimates. One round:
//
//   x_i'    = sum_j w_ij x_j - alpha z_i grad F_i(y_i; zeta)
//   G_i'    = (1 - beta)  (G_i    - G_i(x_i; phi))    + G_i(x_i'; phi)
//   Ghat_i' = (1 - gamma) (Ghat_i - dG_i(x_i; phi))   + dG_i(x_i'; phi)
//   y_i'    = sum_j w_ij y_j + G_i' - G_i
//   z_i'    = sum_j w_ij z_j + Ghat_i' - Ghat_i
//
// with the same inner draw phi evaluated at both x_i and x_i'. The
// compressed variant replaces each neighbour average by a difference-
// compressed exchange against reference states H (see comm()).

#include <dasco/compressors.hpp>
#include <dasco/core.hpp>
#include <dasco/network.hpp>
#include <dasco/problem.hpp>
#include <dasco/random.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dasco {

enum class Algorithm { kDascgd, kCdascgd, kCentral };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kDascgd: return "dascgd";
    case Algorithm::kCdascgd: return "cdascgd";
    case Algorithm::kCentral: return "centralized";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "dascgd") return Algorithm::kDascgd;
  if (s == "cdascgd") return Algorithm::kCdascgd;
  if (s == "central" || s == "centralized") return Algorithm::kCentral;
  throw ConfigError("unknown algorithm '" + std::string(s) + "'");
}

/// One agent's slice of the network state, unpacked to natural shapes.
struct AgentState {
  Vector x;
  Vector G;
  Matrix G_jac;  // d x p
  Vector y;
  Matrix z;      // d x p
};

/// Reference states of the compressed exchange and their mixed copies.
struct ReferenceStates {
  BlockMatrix hx, hx_mixed;
  BlockMatrix hy, hy_mixed;
  BlockMatrix hz, hz_mixed;
};

/// Block-stacked iterates of all agents; row i belongs to agent i.
struct NetworkState {
  int d = 0;
  int p = 0;
  BlockMatrix x;     // n x d
  BlockMatrix G;     // n x p
  BlockMatrix Ghat;  // n x (d*p), column-stacked d x p
  BlockMatrix y;     // n x p
  BlockMatrix z;     // n x (d*p)
  std::optional<ReferenceStates> refs;

  int agents() const { return static_cast<int>(x.rows()); }

  AgentState agent(int i) const {
    return {x.row(i).transpose(), G.row(i).transpose(),
            Eigen::Map<const Matrix>(Ghat.row(i).data(), d, p), y.row(i).transpose(),
            Eigen::Map<const Matrix>(z.row(i).data(), d, p)};
  }
};

struct RoundSizes {
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 1.0;
};

/// alpha_k, beta_k, gamma_k: constant, or s / sqrt(K) over a fixed horizon K.
class StepSchedule {
 public:
  enum class Kind { kConstant, kInvSqrtHorizon };

  static StepSchedule constant(double alpha, double beta, double gamma) {
    return StepSchedule(Kind::kConstant, alpha, beta, gamma, 1);
  }
  static StepSchedule inv_sqrt_horizon(double s1, double s2, double s3, std::int64_t horizon) {
    detail::require(horizon >= 1, "horizon must be positive");
    return StepSchedule(Kind::kInvSqrtHorizon, s1, s2, s3, horizon);
  }

  Kind kind() const { return kind_; }
  double alpha_scale() const { return alpha_; }
  double beta_scale() const { return beta_; }
  double gamma_scale() const { return gamma_; }
  std::int64_t horizon() const { return horizon_; }

  RoundSizes at(std::int64_t /*k*/) const {
    const double f = kind_ == Kind::kConstant ? 1.0 : 1.0 / std::sqrt(static_cast<double>(horizon_));
    return {alpha_ * f, beta_ * f, gamma_ * f};
  }

 private:
  StepSchedule(Kind kind, double a, double b, double g, std::int64_t horizon)
      : kind_(kind), alpha_(a), beta_(b), gamma_(g), horizon_(horizon) {
    const auto s = at(1);
    detail::require(s.alpha >= 0.0 && std::isfinite(s.alpha), "alpha must be nonnegative");
    detail::require(s.beta > 0.0 && s.beta <= 1.0, "beta must lie in (0, 1]");
    detail::require(s.gamma > 0.0 && s.gamma <= 1.0, "gamma must lie in (0, 1]");
  }

  Kind kind_;
  double alpha_, beta_, gamma_;
  std::int64_t horizon_;
};

/// Compressors C1, C2, C3 for x, y, z messages and the mixing/reference
/// scalings alpha_w, alpha_x, alpha_y, alpha_z.
struct CompressionConfig {
  Compressor cx = Compressor::identity();
  Compressor cy = Compressor::identity();
  Compressor cz = Compressor::identity();
  double alpha_w = 1.0;
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  double alpha_z = 1.0;

  void validate(int d, int p) const {
    for (double a : {alpha_w, alpha_x, alpha_y, alpha_z})
      detail::require(a > 0.0 && a <= 1.0, "compression scalings must lie in (0, 1]");
    cx.check_dim(d);
    cy.check_dim(p);
    cz.check_dim(static_cast<Eigen::Index>(d) * p);
  }

  bool all_identity() const { return cx.is_identity() && cy.is_identity() && cz.is_identity(); }
};

struct BitCounts {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  std::int64_t total() const { return x + y + z; }
  BitCounts& operator+=(const BitCounts& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

struct StepResult {
  NetworkState state;
  BitCounts bits;
};

struct CommResult {
  BlockMatrix v_hat;
  BlockMatrix v_hat_mixed;
  BlockMatrix h;
  BlockMatrix h_mixed;
  std::int64_t bits = 0;
};

namespace detail {

inline void check_finite(const NetworkState& s, std::int64_t round) {
  if (!s.x.allFinite()) throw DivergenceError(round, "non-finite decision variable");
  if (!s.G.allFinite() || !s.Ghat.allFinite()) throw DivergenceError(round, "non-finite estimate");
  if (!s.y.allFinite() || !s.z.allFinite()) throw DivergenceError(round, "non-finite tracker");
}

inline void check_shapes(const NetworkState& s, const CompositionalProblem& problem,
                         const MixingMatrix& w) {
  const int n = problem.agents();
  require_dims(s.d == problem.dim() && s.p == problem.inner_dim(), "state/problem dimension mismatch");
  require_dims(w.size() == n && s.agents() == n, "state/network agent count mismatch");
  const Eigen::Index dp = static_cast<Eigen::Index>(s.d) * s.p;
  require_dims(s.x.cols() == s.d && s.G.cols() == s.p && s.y.cols() == s.p &&
                   s.Ghat.cols() == dp && s.z.cols() == dp,
               "state block shapes are inconsistent");
}

inline double max_abs_deviation(const BlockMatrix& a, const BlockMatrix& b) {
  return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

/// Gradient step plus estimator and tracker updates, shared by both methods.
/// `x_base`, `y_base`, `z_base` are the communication part of each update
/// (W~x or x - alpha_w (x^ - x^w), and likewise for y, z).
inline NetworkState advance(const NetworkState& s, const CompositionalProblem& problem,
                            const RoundSizes& sizes, int batch, std::uint64_t seed,
                            std::int64_t round, const BlockMatrix& x_base,
                            const BlockMatrix& y_base, const BlockMatrix& z_base) {
  require(batch >= 1, "batch must be at least 1");
  NetworkState next;
  next.d = s.d;
  next.p = s.p;
  next.x.resize(s.x.rows(), s.x.cols());
  next.G.resize(s.G.rows(), s.G.cols());
  next.Ghat.resize(s.Ghat.rows(), s.Ghat.cols());
  next.y.resize(s.y.rows(), s.y.cols());
  next.z.resize(s.z.rows(), s.z.cols());

  // Agents are independent within a round; each reads only the previous
  // round's values and its own rng stream.
  for (int i = 0; i < s.agents(); ++i) {
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(round),
                        Stream::kSample);
    const Vector y_i = s.y.row(i).transpose();
    const Vector outer = problem.sample_outer_grad(i, y_i, rng);
    const Eigen::Map<const Matrix> z_i(s.z.row(i).data(), s.d, s.p);

    const std::array<Vector, 2> points{Vector(s.x.row(i).transpose()),
                                       Vector(x_base.row(i).transpose() - sizes.alpha * (z_i * outer))};
    if (!points[1].allFinite()) throw DivergenceError(round, "non-finite decision variable");
    const auto samples = problem.sample_inner(i, points, batch, rng);
    const auto& at_old = samples[0];
    const auto& at_new = samples[1];

    next.x.row(i) = points[1].transpose();
    next.G.row(i) = (1.0 - sizes.beta) * (s.G.row(i) - at_old.value.transpose()) + at_new.value.transpose();
    const Eigen::Map<const Eigen::RowVectorXd> jac_old(at_old.jacobian.data(), at_old.jacobian.size());
    const Eigen::Map<const Eigen::RowVectorXd> jac_new(at_new.jacobian.data(), at_new.jacobian.size());
    next.Ghat.row(i) = (1.0 - sizes.gamma) * (s.Ghat.row(i) - jac_old) + jac_new;
    next.y.row(i) = y_base.row(i) + next.G.row(i) - s.G.row(i);
    next.z.row(i) = z_base.row(i) + next.Ghat.row(i) - s.Ghat.row(i);
  }
  check_finite(next, round);
  return next;
}

inline std::vector<Rng> compression_streams(int agents, std::uint64_t seed, std::int64_t round) {
  std::vector<Rng> out;
  out.reserve(agents);
  for (int i = 0; i < agents; ++i)
    out.push_back(child_rng(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(round),
                            Stream::kCompress));
  return out;
}

}  // namespace detail

/// Initial iterates: x_i ~ 0.1 N(0, I), (G_i, Ghat_i) from one inner sample at
/// x_i, y_i = G_i, z_i = Ghat_i. Compressed mode starts from H = 0 = W~H.
inline NetworkState init_states(const CompositionalProblem& problem, bool compressed, int batch,
                                std::uint64_t seed) {
  detail::require(batch >= 1, "batch must be at least 1");
  const int n = problem.agents();
  const int d = problem.dim();
  const int p = problem.inner_dim();
  const Eigen::Index dp = static_cast<Eigen::Index>(d) * p;
  NetworkState s;
  s.d = d;
  s.p = p;
  s.x.resize(n, d);
  s.G.resize(n, p);
  s.Ghat.resize(n, dp);
  for (int i = 0; i < n; ++i) {
    Rng init = child_rng(seed, static_cast<std::uint64_t>(i), 0, Stream::kInit);
    std::normal_distribution<double> normal(0.0, 0.1);
    Vector x(d);
    for (int c = 0; c < d; ++c) x[c] = normal(init);
    Rng sample = child_rng(seed, static_cast<std::uint64_t>(i), 0, Stream::kSample);
    const auto g = problem.sample_inner(i, x, batch, sample);
    s.x.row(i) = x.transpose();
    s.G.row(i) = g.value.transpose();
    s.Ghat.row(i) = Eigen::Map<const Eigen::RowVectorXd>(g.jacobian.data(), dp);
  }
  s.y = s.G;
  s.z = s.Ghat;
  if (compressed) {
    ReferenceStates r;
    r.hx = r.hx_mixed = BlockMatrix::Zero(n, d);
    r.hy = r.hy_mixed = BlockMatrix::Zero(n, p);
    r.hz = r.hz_mixed = BlockMatrix::Zero(n, dp);
    s.refs = std::move(r);
  }
  return s;
}

inline std::int64_t uncompressed_round_bits(const MixingMatrix& w, int d, int p) {
  return static_cast<std::int64_t>(w.directed_edge_count()) *
         (d + p + static_cast<std::int64_t>(d) * p) * kFloatBits;
}

/// One round of the uncompressed method. `round` is the index k of the
/// iterate being advanced (k >= 1) and selects the agents' rng streams.
inline StepResult dascgd_step(const NetworkState& s, const MixingMatrix& w,
                              const CompositionalProblem& problem, const RoundSizes& sizes, int batch,
                              std::uint64_t seed, std::int64_t round) {
  detail::check_shapes(s, problem, w);
  StepResult out;
  out.state = detail::advance(s, problem, sizes, batch, seed, round, w.mix(s.x), w.mix(s.y), w.mix(s.z));
  const auto edges = static_cast<std::int64_t>(w.directed_edge_count());
  out.bits.x = edges * s.d * kFloatBits;
  out.bits.y = edges * s.p * kFloatBits;
  out.bits.z = edges * s.d * s.p * kFloatBits;
  return out;
}

/// Difference-compressed exchange of a block variable v against reference H
/// with mirrored mixed reference H^w = W~H:
///
///   Q = C(v - H);  v^ = H + Q;  v^w = H^w + W~Q;
///   H' = (1 - a) H + a v^;  H^w' = (1 - a) H^w + a v^w.
///
/// Only Q travels; `bits` sums each agent's message cost times its out-degree.
inline CommResult comm(const BlockMatrix& v, const BlockMatrix& h, const BlockMatrix& h_mixed,
                       const Compressor& compressor, double scale, const MixingMatrix& w,
                       std::span<Rng> agent_rngs, bool verify = true, double tolerance = 1e-9) {
  detail::require_dims(v.rows() == h.rows() && v.cols() == h.cols() && h_mixed.rows() == h.rows() &&
                           h_mixed.cols() == h.cols() && v.rows() == w.size(),
                       "comm operands have inconsistent shapes");
  detail::require_dims(static_cast<int>(agent_rngs.size()) == w.size(), "need one rng per agent");
  detail::require(scale > 0.0 && scale <= 1.0, "reference scaling must lie in (0, 1]");
  if (verify) {
    const double dev = detail::max_abs_deviation(h_mixed, w.mix(h));
    const double ref = std::max(1.0, h.size() ? h.cwiseAbs().maxCoeff() : 0.0);
    if (dev > tolerance * ref)
      throw ConsistencyError("mixed reference drifted from W~H by " + detail::format_double(dev));
  }
  BlockMatrix q(v.rows(), v.cols());
  std::int64_t bits = 0;
  for (int i = 0; i < w.size(); ++i) {
    const Vector diff = (v.row(i) - h.row(i)).transpose();
    auto c = compressor.compress(diff, agent_rngs[i]);
    q.row(i) = c.values.transpose();
    bits += c.bits * w.out_degree(i);
  }
  CommResult r;
  r.v_hat = h + q;
  r.v_hat_mixed = h_mixed + w.mix(q);
  r.h = (1.0 - scale) * h + scale * r.v_hat;
  r.h_mixed = (1.0 - scale) * h_mixed + scale * r.v_hat_mixed;
  r.bits = bits;
  return r;
}

/// One round of the compressed method: three exchanges (x with C1/alpha_x,
/// y with C2/alpha_y, z with C3/alpha_z), then
///
///   x' = x - alpha_w (x^ - x^w) - alpha U
///   y' = y - alpha_w (y^ - y^w) + G' - G
///   z' = z - alpha_w (z^ - z^w) + Ghat' - Ghat
inline StepResult cdascgd_step(const NetworkState& s, const MixingMatrix& w,
                               const CompositionalProblem& problem, const RoundSizes& sizes,
                               const CompressionConfig& cc, int batch, std::uint64_t seed,
                               std::int64_t round, bool verify = true) {
  detail::check_shapes(s, problem, w);
  if (!s.refs) throw ConsistencyError("compressed step needs reference states");
  cc.validate(s.d, s.p);
  const ReferenceStates& r = *s.refs;
  auto rngs = detail::compression_streams(w.size(), seed, round);

  const auto cx = comm(s.x, r.hx, r.hx_mixed, cc.cx, cc.alpha_x, w, rngs, verify);
  const auto cy = comm(s.y, r.hy, r.hy_mixed, cc.cy, cc.alpha_y, w, rngs, verify);
  const auto cz = comm(s.z, r.hz, r.hz_mixed, cc.cz, cc.alpha_z, w, rngs, verify);

  const BlockMatrix x_base = s.x - cc.alpha_w * (cx.v_hat - cx.v_hat_mixed);
  const BlockMatrix y_base = s.y - cc.alpha_w * (cy.v_hat - cy.v_hat_mixed);
  const BlockMatrix z_base = s.z - cc.alpha_w * (cz.v_hat - cz.v_hat_mixed);

  StepResult out;
  out.state = detail::advance(s, problem, sizes, batch, seed, round, x_base, y_base, z_base);
  out.state.refs = ReferenceStates{cx.h, cx.h_mixed, cy.h, cy.h_mixed, cz.h, cz.h_mixed};
  out.bits = {cx.bits, cy.bits, cz.bits};
  return out;
}

/// Single-node baseline: the uncompressed recursion with W = [1] on the
/// pooled problem, each inner sample averaging `batch` draws from every
/// agent's distribution. `s` must hold exactly one agent.
inline StepResult centralized_step(const NetworkState& s, const CompositionalProblem& problem,
                                   const RoundSizes& sizes, int batch, std::uint64_t seed,
                                   std::int64_t round) {
  static const MixingMatrix kSingle = MixingMatrix::trivial();
  const PooledProblem pooled(problem);
  return dascgd_step(s, kSingle, pooled, sizes, batch, seed, round);
}

}  // namespace dasco
