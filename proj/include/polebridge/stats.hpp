#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace polebridge {

/// Pairwise (tree) summation; the result depends only on the order of `v`.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se = 0.0;
};

inline SampleStats sample_stats(std::span<const double> v) {
  SampleStats s;
  s.n = v.size();
  if (s.n == 0) return s;
  s.mean = pairwise_sum(v) / static_cast<double>(s.n);
  if (s.n < 2) return s;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - s.mean) * (v[i] - s.mean);
  s.variance = pairwise_sum(sq) / static_cast<double>(s.n - 1);
  s.se = std::sqrt(s.variance / static_cast<double>(s.n));
  return s;
}

/// (difference) / scale with 0/0 -> 0 and x/0 -> ±inf.
inline double z_value(double difference, double scale) {
  if (scale > 0.0) return difference / scale;
  if (difference == 0.0) return 0.0;
  return difference > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

struct GridMeta {
  std::size_t steps = 0;
  double eps_end = 0.0;
  std::string refinement;
};

/// Monte Carlo estimate bundle. z_score uses se_diff, which is the paired
/// standard error when both sides come from the same paths and the combined
/// √(se_lhs² + se_rhs²) otherwise.
struct McReport {
  std::string label;
  double estimate_lhs = 0.0;
  double estimate_rhs = 0.0;
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double se_diff = 0.0;
  double z_score = 0.0;
  bool paired = false;
  std::size_t n_paths = 0;
  std::size_t n_failed = 0;
  GridMeta grid;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  std::map<std::string, double> extras;  // ordered for reproducible output

  double combined_se() const { return std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs); }
};

/// Fills estimates, standard errors and the z-score from per-path samples.
/// When `paired`, lhs[i] and rhs[i] come from one path.
inline void fill_estimates(McReport& rep, std::span<const double> lhs, std::span<const double> rhs, bool paired) {
  const auto a = sample_stats(lhs);
  const auto b = sample_stats(rhs);
  rep.estimate_lhs = a.mean;
  rep.estimate_rhs = b.mean;
  rep.se_lhs = a.se;
  rep.se_rhs = b.se;
  rep.paired = paired && lhs.size() == rhs.size();
  if (rep.paired) {
    std::vector<double> d(lhs.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = lhs[i] - rhs[i];
    rep.se_diff = sample_stats(d).se;
  } else {
    rep.se_diff = rep.combined_se();
  }
  rep.z_score = z_value(rep.estimate_lhs - rep.estimate_rhs, rep.se_diff);
}

}  // namespace polebridge
