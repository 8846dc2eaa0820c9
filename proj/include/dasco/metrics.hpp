#pragma once

// Per-round diagnostics and the run record they accumulate into.

#include <dasco/algorithms.hpp>
#include <dasco/core.hpp>
#include <dasco/problem.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace dasco {

inline constexpr std::string_view kCsvHeader =
    "k,avg_residual,avg_grad_sq,consensus_x,consensus_y,consensus_z,track_err_y,track_err_z,"
    "bits_cumulative";

struct Optimum {
  Vector x;
  double value = 0.0;
};

inline Optimum make_optimum(const CompositionalProblem& problem, Vector x_star) {
  const double v = problem.full_objective(x_star);
  return {std::move(x_star), v};
}

struct MetricRow {
  std::int64_t k = 0;
  double avg_residual = 0.0;
  double avg_grad_sq = 0.0;
  double consensus_x = 0.0;
  double consensus_y = 0.0;
  double consensus_z = 0.0;
  double track_err_y = 0.0;
  double track_err_z = 0.0;
  double bits_cumulative = 0.0;
};

/// ||v - 1 (x) mean(v)||^2 over a block-stacked variable.
inline double consensus_error(const BlockMatrix& v) {
  if (v.rows() == 0) return 0.0;
  const Eigen::RowVectorXd mean = v.colwise().mean();
  return (v.rowwise() - mean).squaredNorm();
}

inline double tracking_error(const BlockMatrix& tracker, const BlockMatrix& estimate) {
  return (tracker.colwise().mean() - estimate.colwise().mean()).norm();
}

/// Metrics use exact oracles, so they are noise-free functions of the iterates.
inline MetricRow compute_metrics(const NetworkState& s, const CompositionalProblem& problem,
                                 const Optimum& opt, std::int64_t k = 0, double bits = 0.0) {
  MetricRow row;
  row.k = k;
  const int n = s.agents();
  for (int i = 0; i < n; ++i) {
    const Vector xi = s.x.row(i).transpose();
    // h(x*) is the exact minimum, so negative gaps are rounding only.
    row.avg_residual += std::max(0.0, problem.full_objective(xi) - opt.value);
    row.avg_grad_sq += problem.full_gradient(xi).squaredNorm();
  }
  row.avg_residual /= n;
  row.avg_grad_sq /= n;
  row.consensus_x = consensus_error(s.x);
  row.consensus_y = consensus_error(s.y);
  row.consensus_z = consensus_error(s.z);
  row.track_err_y = tracking_error(s.y, s.G);
  row.track_err_z = tracking_error(s.z, s.Ghat);
  row.bits_cumulative = bits;
  return row;
}

/// Static per-round message cost: every directed edge carries one x, one y,
/// and one z message.
inline std::int64_t bits_for_round(Algorithm algo, int n, int d, int p,
                                   const CompressionConfig& compressors, int edge_count) {
  detail::require(n >= 1 && d >= 1 && p >= 1 && edge_count >= 0, "dimensions must be positive");
  const std::int64_t dp = static_cast<std::int64_t>(d) * p;
  if (algo == Algorithm::kCdascgd) {
    return static_cast<std::int64_t>(edge_count) *
           (compressors.cx.bits_per_message(d) + compressors.cy.bits_per_message(p) +
            compressors.cz.bits_per_message(dp));
  }
  return static_cast<std::int64_t>(edge_count) * (d + p + dp) * kFloatBits;
}

struct RunMetadata {
  std::string algo;
  std::string topology;
  int n = 0;
  int d = 0;
  int p = 0;
  int states = 0;
  std::int64_t K = 0;
  int batch = 0;
  std::string schedule;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double alpha_w = 0.0, alpha_x = 0.0, alpha_y = 0.0, alpha_z = 0.0;
  std::string compressor_x, compressor_y, compressor_z;
  std::uint64_t seed = 0;
  double rho = 0.0;
  std::vector<std::string> notes;
};

struct RunRecord {
  RunMetadata meta;
  std::vector<MetricRow> rows;
  BitCounts bits;  // cumulative per message class at the end of the run

  const MetricRow& initial() const { return rows.front(); }
  const MetricRow& final() const { return rows.back(); }
};

namespace detail {

inline std::string format_count(double v) {
  if (v == std::floor(v) && std::abs(v) < 9.0e15) return std::to_string(static_cast<std::int64_t>(v));
  return format_double(v);
}

}  // namespace detail

inline void write_csv(const std::vector<MetricRow>& rows, std::ostream& os) {
  using detail::format_double;
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_double(r.avg_residual) << ',' << format_double(r.avg_grad_sq) << ','
       << format_double(r.consensus_x) << ',' << format_double(r.consensus_y) << ','
       << format_double(r.consensus_z) << ',' << format_double(r.track_err_y) << ','
       << format_double(r.track_err_z) << ',' << detail::format_count(r.bits_cumulative) << '\n';
  }
}

inline std::vector<MetricRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ConfigError("unexpected CSV header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> cells;
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != 9) throw ConfigError("CSV row has " + std::to_string(cells.size()) + " cells");
    rows.push_back({static_cast<std::int64_t>(cells[0]), cells[1], cells[2], cells[3], cells[4],
                    cells[5], cells[6], cells[7], cells[8]});
  }
  return rows;
}

/// Row-wise arithmetic mean of equally sampled runs.
inline std::vector<MetricRow> mean_rows(const std::vector<const std::vector<MetricRow>*>& runs) {
  detail::require(!runs.empty(), "need at least one run to average");
  const auto& first = *runs.front();
  for (const auto* r : runs)
    detail::require(r->size() == first.size(), "runs have different row counts");
  std::vector<MetricRow> out(first.size());
  const double m = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    MetricRow acc;
    acc.k = first[i].k;
    for (const auto* run : runs) {
      const auto& r = (*run)[i];
      detail::require(r.k == acc.k, "runs are sampled at different rounds");
      acc.avg_residual += r.avg_residual;
      acc.avg_grad_sq += r.avg_grad_sq;
      acc.consensus_x += r.consensus_x;
      acc.consensus_y += r.consensus_y;
      acc.consensus_z += r.consensus_z;
      acc.track_err_y += r.track_err_y;
      acc.track_err_z += r.track_err_z;
      acc.bits_cumulative += r.bits_cumulative;
    }
    acc.avg_residual /= m;
    acc.avg_grad_sq /= m;
    acc.consensus_x /= m;
    acc.consensus_y /= m;
    acc.consensus_z /= m;
    acc.track_err_y /= m;
    acc.track_err_z /= m;
    acc.bits_cumulative /= m;
    out[i] = acc;
  }
  return out;
}

}  // namespace dasco
