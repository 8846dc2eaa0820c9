#pragma once

// Contractive compression operators with transmitted-bit accounting.
//
// Contract: E||C(x)/r - x||^2 <= (1 - psi) ||x||^2 for some r > 0, psi in (0,1].

#include <dasco/core.hpp>
#include <dasco/random.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace dasco {

/// Cost of one uncompressed double on the wire.
inline constexpr std::int64_t kFloatBits = 64;

struct Compressed {
  Vector values;
  std::int64_t bits = 0;
};

struct ContractConstants {
  double r = 1.0;
  double psi = 1.0;
};

inline int ceil_log2(std::int64_t m) {
  int bits = 0;
  while ((std::int64_t{1} << bits) < m) ++bits;
  return bits;
}

/// Stochastic l-bit quantizer with an explicit dither vector u in [0,1)^m.
inline Compressed quantize_lbit(const Vector& x, int levels_bits, const Vector& u) {
  detail::require(levels_bits >= 1, "quantizer needs at least 1 bit per entry");
  detail::require_dims(u.size() == x.size(), "dither length mismatch");
  const double x_max = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  Compressed out{Vector::Zero(x.size()), kFloatBits};
  if (x_max == 0.0) return out;
  const double scale = std::ldexp(1.0, levels_bits - 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double level = std::floor(scale * std::abs(x[i]) / x_max + u[i]);
    const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
    out.values[i] = x_max / scale * sign * level;
  }
  out.bits = static_cast<std::int64_t>(x.size()) * levels_bits + kFloatBits;
  return out;
}

inline Compressed quantize_lbit(const Vector& x, int levels_bits, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector u(x.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = uniform(rng);
  return quantize_lbit(x, levels_bits, u);
}

/// Keeps the t largest-magnitude entries; ties go to the lowest index.
inline Compressed top_t(const Vector& x, int t) {
  const auto m = x.size();
  if (t < 1 || t > m) throw ConfigError("top-t needs 1 <= t <= dimension");
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::partial_sort(order.begin(), order.begin() + t, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      const double fa = std::abs(x[a]);
                      const double fb = std::abs(x[b]);
                      return fa > fb || (fa == fb && a < b);
                    });
  Compressed out{Vector::Zero(m), 0};
  for (int k = 0; k < t; ++k) out.values[order[k]] = x[order[k]];
  out.bits = static_cast<std::int64_t>(t) * (kFloatBits + ceil_log2(m));
  return out;
}

class Compressor {
 public:
  enum class Kind { kIdentity, kQuantizer, kTopT };

  static Compressor identity() { return Compressor(Kind::kIdentity, 0); }
  static Compressor quantizer(int bits) {
    detail::require(bits >= 1, "quantizer needs at least 1 bit per entry");
    return Compressor(Kind::kQuantizer, bits);
  }
  static Compressor top(int t) {
    detail::require(t >= 1, "top-t needs t >= 1");
    return Compressor(Kind::kTopT, t);
  }

  /// Accepts `none`, `quant:l=<bits>` and `topt:t=<count>`.
  static Compressor parse(std::string_view text) {
    if (text == "none" || text == "identity") return identity();
    auto int_after = [&](std::string_view prefix) -> int {
      const auto body = text.substr(prefix.size());
      int value = 0;
      const auto res = std::from_chars(body.data(), body.data() + body.size(), value);
      if (res.ec != std::errc() || res.ptr != body.data() + body.size())
        throw ConfigError("bad compressor parameter in '" + std::string(text) + "'");
      return value;
    };
    if (text.starts_with("quant:l=")) return quantizer(int_after("quant:l="));
    if (text.starts_with("topt:t=")) return top(int_after("topt:t="));
    throw ConfigError("unknown compressor '" + std::string(text) + "'");
  }

  Kind kind() const { return kind_; }
  int parameter() const { return param_; }
  bool is_identity() const { return kind_ == Kind::kIdentity; }

  std::string spec() const {
    switch (kind_) {
      case Kind::kIdentity: return "none";
      case Kind::kQuantizer: return "quant:l=" + std::to_string(param_);
      case Kind::kTopT: return "topt:t=" + std::to_string(param_);
    }
    return {};
  }

  /// Throws if the compressor cannot act on vectors of length `dim`.
  void check_dim(Eigen::Index dim) const {
    if (kind_ == Kind::kTopT && param_ > dim)
      throw ConfigError(spec() + " exceeds message dimension " + std::to_string(dim));
  }

  Compressed compress(const Vector& x, Rng& rng) const {
    switch (kind_) {
      case Kind::kIdentity: return {x, bits_per_message(x.size())};
      case Kind::kQuantizer: return quantize_lbit(x, param_, rng);
      case Kind::kTopT: return top_t(x, param_);
    }
    return {};
  }

  /// Matrices travel column-stacked and are reshaped on arrival.
  Matrix compress(const Matrix& m, Rng& rng, std::int64_t* bits = nullptr) const {
    const Vector flat = Eigen::Map<const Vector>(m.data(), m.size());
    auto c = compress(flat, rng);
    if (bits) *bits = c.bits;
    return Eigen::Map<const Matrix>(c.values.data(), m.rows(), m.cols());
  }

  /// Nominal cost of one message of length `dim`.
  std::int64_t bits_per_message(Eigen::Index dim) const {
    switch (kind_) {
      case Kind::kIdentity: return static_cast<std::int64_t>(dim) * kFloatBits;
      case Kind::kQuantizer: return static_cast<std::int64_t>(dim) * param_ + kFloatBits;
      case Kind::kTopT:
        return static_cast<std::int64_t>(std::min<Eigen::Index>(param_, dim)) *
               (kFloatBits + ceil_log2(dim));
    }
    return 0;
  }

  /// Contract constants that hold for every input of length `dim`.
  ///
  /// The quantizer is unbiased with per-entry variance at most x_max^2 / 4^l,
  /// and the entry attaining x_max is exact, so E||C(x) - x||^2 <= w ||x||^2
  /// with w = (dim - 1) / 4^l. Scaling by r = 1 + w gives psi = 1 / (1 + w).
  ContractConstants nominal_contract(Eigen::Index dim) const {
    switch (kind_) {
      case Kind::kIdentity: return {1.0, 1.0};
      case Kind::kTopT:
        return {1.0, static_cast<double>(std::min<Eigen::Index>(param_, dim)) /
                         static_cast<double>(dim)};
      case Kind::kQuantizer: {
        const double w = static_cast<double>(dim - 1) / std::ldexp(1.0, 2 * param_);
        return {1.0 + w, 1.0 / (1.0 + w)};
      }
    }
    return {};
  }

 private:
  Compressor(Kind kind, int param) : kind_(kind), param_(param) {}

  Kind kind_;
  int param_;
};

/// Empirical contract constants on standard-normal inputs of length `dim`.
///
/// The scaling r minimises the mean relative error over all trials (closed
/// form for the quadratic in 1/r); psi is one minus the worst per-vector
/// relative error, each estimated from `draws` compressor draws. Identity
/// and top-t have exact constants and are returned directly.
inline ContractConstants contract_estimate(const Compressor& c, Eigen::Index dim, int trials, Rng& rng,
                                           int draws = 4) {
  detail::require(trials >= 100, "contract estimate needs at least 100 trials");
  detail::require(dim >= 1 && draws >= 1, "dimension and draw count must be positive");
  c.check_dim(dim);
  if (c.kind() != Compressor::Kind::kQuantizer) return c.nominal_contract(dim);

  std::normal_distribution<double> normal;
  std::vector<double> sq(trials), inner(trials);
  double mean_sq = 0.0, mean_inner = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = normal(rng);
    const double norm2 = x.squaredNorm();
    double a = 0.0, b = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Vector q = c.compress(x, rng).values;
      a += q.squaredNorm();
      b += q.dot(x);
    }
    sq[t] = a / (draws * norm2);
    inner[t] = b / (draws * norm2);
    mean_sq += sq[t];
    mean_inner += inner[t];
  }
  const double inv_r = mean_inner / mean_sq;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t)
    worst = std::max(worst, sq[t] * inv_r * inv_r - 2.0 * inner[t] * inv_r + 1.0);
  return {1.0 / inv_r, 1.0 - worst};
}

}  // namespace dasco
