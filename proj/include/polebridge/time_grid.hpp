#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "polebridge/errors.hpp"

namespace polebridge {

struct Refinement {
  enum class Kind { uniform, geometric };
  Kind kind = Kind::geometric;
  double ratio = 0.9;  // geometric only: (1 - t_{k+1}) = ratio (1 - t_k)

  static Refinement uniform() { return {Kind::uniform, 1.0}; }
  static Refinement geometric(double ratio) { return {Kind::geometric, ratio}; }

  std::string describe() const {
    if (kind == Kind::uniform) return "uniform";
    char buf[48];
    std::snprintf(buf, sizeof buf, "geometric(%.17g)", ratio);
    return buf;
  }
};

/// Increasing nodes 0 = t_0 < ... < t_K = 1 - eps_end. With geometric
/// refinement the grid is uniform up to `zone_start()` and geometric in 1 - t
/// afterwards, with the uniform step matched to the first geometric step.
class TimeGrid {
 public:
  TimeGrid() = default;

  /// Explicit nodes; only strict monotonicity and t_0 = 0 are checked.
  static TimeGrid from_nodes(std::vector<double> nodes, double eps_end = 0.0) {
    if (nodes.empty() || nodes.front() != 0.0) throw InputError("time grid must start at 0");
    for (std::size_t k = 1; k < nodes.size(); ++k)
      if (!(nodes[k] > nodes[k - 1])) throw InputError("time grid must be strictly increasing");
    if (nodes.back() >= 1.0) throw InputError("time grid must end before 1");
    TimeGrid g;
    g.nodes_ = std::move(nodes);
    g.eps_end_ = eps_end;
    g.refinement_ = Refinement::uniform();
    g.zone_start_ = g.nodes_.size() - 1;
    return g;
  }

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t steps() const noexcept { return nodes_.empty() ? 0 : nodes_.size() - 1; }
  double operator[](std::size_t k) const { return nodes_[k]; }
  double dt(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
  double back() const { return nodes_.back(); }
  double eps_end() const noexcept { return eps_end_; }
  const Refinement& refinement() const noexcept { return refinement_; }
  std::size_t zone_start() const noexcept { return zone_start_; }

  /// Nearest node to t; throws if t lies outside [0, t_K] by more than half a step.
  std::size_t nearest_node(double t) const {
    if (nodes_.empty()) throw InputError("empty time grid");
    const double slack = nodes_.size() > 1 ? 0.5 * dt(nodes_.size() - 2) : 0.0;
    if (!(t >= 0.0) || t > nodes_.back() + slack)
      throw InputError("time " + std::to_string(t) + " outside the grid range [0, " +
                       std::to_string(nodes_.back()) + "]");
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.end()) return nodes_.size() - 1;
    std::size_t k = static_cast<std::size_t>(it - nodes_.begin());
    if (k > 0 && (t - nodes_[k - 1]) <= (nodes_[k] - t)) --k;
    return k;
  }

  /// Every interval split in two: arithmetic midpoints in the uniform zone,
  /// geometric midpoints of 1 - t in the refinement zone. Node 2k of the
  /// result is node k of this grid.
  TimeGrid halved() const {
    TimeGrid g;
    g.eps_end_ = eps_end_;
    g.refinement_ = refinement_;
    if (refinement_.kind == Refinement::Kind::geometric) g.refinement_.ratio = std::sqrt(refinement_.ratio);
    g.zone_start_ = 2 * zone_start_;
    g.nodes_.reserve(2 * nodes_.size());
    for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
      g.nodes_.push_back(nodes_[k]);
      if (k >= zone_start_)
        g.nodes_.push_back(1.0 - std::sqrt((1.0 - nodes_[k]) * (1.0 - nodes_[k + 1])));
      else
        g.nodes_.push_back(0.5 * (nodes_[k] + nodes_[k + 1]));
    }
    g.nodes_.push_back(nodes_.back());
    return g;
  }

 private:
  friend TimeGrid make_time_grid(std::size_t, double, Refinement);

  std::vector<double> nodes_;
  double eps_end_ = 0.0;
  Refinement refinement_;
  std::size_t zone_start_ = 0;
};

inline TimeGrid make_time_grid(std::size_t steps, double eps_end, Refinement refinement) {
  if (steps < 2) throw InputError("steps must be >= 2");
  if (!(eps_end > 0.0 && eps_end <= 0.5)) throw InputError("eps_end must lie in (0, 0.5]");
  const double t_end = 1.0 - eps_end;

  TimeGrid g;
  g.eps_end_ = eps_end;
  g.refinement_ = refinement;
  g.nodes_.reserve(steps + 1);

  if (refinement.kind == Refinement::Kind::uniform) {
    for (std::size_t k = 0; k <= steps; ++k) g.nodes_.push_back(t_end * static_cast<double>(k) / steps);
    g.nodes_.back() = t_end;
    g.zone_start_ = steps;
    return g;
  }

  const double ratio = refinement.ratio;
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("geometric ratio must lie in (0, 1)");

  // Choose the number m of geometric steps so that the uniform step over
  // [0, 1 - z] with z = eps_end / ratio^m best matches (1 - ratio) z.
  std::size_t best_m = 0;
  double best_mismatch = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < steps; ++m) {
    const double z = eps_end * std::pow(ratio, -static_cast<double>(m));
    if (z >= 1.0) break;
    const double uniform_dt = (1.0 - z) / static_cast<double>(steps - m);
    const double mismatch = std::abs(std::log(uniform_dt / ((1.0 - ratio) * z)));
    if (mismatch < best_mismatch) {
      best_mismatch = mismatch;
      best_m = m;
    }
  }

  const std::size_t m = best_m;
  const std::size_t k0 = steps - m;
  const double z = eps_end * std::pow(ratio, -static_cast<double>(m));
  for (std::size_t k = 0; k < k0; ++k) g.nodes_.push_back((1.0 - z) * static_cast<double>(k) / k0);
  for (std::size_t j = 0; j <= m; ++j)
    g.nodes_.push_back(1.0 - eps_end * std::pow(ratio, -static_cast<double>(m - j)));
  g.nodes_.back() = t_end;
  g.zone_start_ = k0;
  return g;
}

}  // namespace polebridge
