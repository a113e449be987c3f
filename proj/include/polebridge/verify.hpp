#pragma once

// Monte Carlo checks over simulated bridge and free paths. Every check draws
// path i from path_stream(seed, i); results are stored by path index and
// reduced in index order, so outputs do not depend on the worker count.

#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "polebridge/bridge_sde.hpp"
#include "polebridge/geometry.hpp"
#include "polebridge/parallel.hpp"
#include "polebridge/pathspace.hpp"
#include "polebridge/rng.hpp"
#include "polebridge/stats.hpp"
#include "polebridge/time_grid.hpp"

namespace polebridge {

struct McSettings {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  int jobs = 1;
  Eigen::VectorXd x0;  // start point; empty means r0 e_1
  double r0 = 1.0;
  // Draw increments on grid.halved()^coupling_levels and aggregate, so that a
  // run on the halved grid with one level fewer sees the same Brownian path.
  int coupling_levels = 0;
};

/// Calls fn(std::integral_constant<int, N>) with N = dim for 1..4, else Eigen::Dynamic.
template <class Fn>
decltype(auto) with_dimension(int dim, Fn&& fn) {
  switch (dim) {
    case 1:
      return fn(std::integral_constant<int, 1>{});
    case 2:
      return fn(std::integral_constant<int, 2>{});
    case 3:
      return fn(std::integral_constant<int, 3>{});
    case 4:
      return fn(std::integral_constant<int, 4>{});
    default:
      return fn(std::integral_constant<int, Eigen::Dynamic>{});
  }
}

inline Eigen::VectorXd start_point(const GeometryModel& geom, const McSettings& s) {
  if (s.x0.size() > 0) {
    if (s.x0.size() != geom.dim()) throw InputError("x0 dimension does not match geometry");
    return s.x0;
  }
  if (!(s.r0 > 0.0) || !std::isfinite(s.r0)) throw InputError("r0 must be > 0");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(geom.dim());
  x(0) = s.r0;
  return x;
}

inline GridMeta grid_meta(const TimeGrid& grid) {
  return {grid.steps(), grid.eps_end(), grid.refinement().describe()};
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <int N>
std::vector<Vec<N>> path_increments(const TimeGrid& grid, const McSettings& s, std::size_t index, int dim) {
  auto rng = path_stream(s.seed, index, StreamTag::path);
  if (s.coupling_levels > 0) return coupled_increments<N>(grid, rng, dim, s.coupling_levels);
  return draw_increments<N>(grid, rng, dim);
}

template <int N>
FramePathSample<N> sample_path(const GeometryModel& geom, const TimeGrid& grid, const McSettings& s,
                               std::size_t index, PathKind kind) {
  const ChartPoint<N> x0 = start_point(geom, s);
  const auto inc = path_increments<N>(grid, s, index, geom.dim());
  const std::span<const Vec<N>> span(inc);
  return kind == PathKind::bridge ? simulate_bridge<N>(geom, x0, grid, span) : simulate_bm<N>(geom, x0, grid, span);
}

inline void require_times_on_grid(const CylinderFunctional& F, const TimeGrid& grid) {
  if (!F.times().empty() && F.times().back() > grid.back() + 1e-12)
    throw InputError("functional " + F.label() + " uses a time beyond the last grid node " +
                     std::to_string(grid.back()));
}

inline McReport new_report(std::string label, const TimeGrid& grid, const McSettings& s) {
  McReport rep;
  rep.label = std::move(label);
  rep.grid = grid_meta(grid);
  rep.seed = s.seed;
  return rep;
}

// Sub-grid of the first k+1 nodes.
inline TimeGrid truncated(const TimeGrid& grid, std::size_t k) {
  std::vector<double> nodes(grid.nodes().begin(), grid.nodes().begin() + static_cast<std::ptrdiff_t>(k + 1));
  return TimeGrid::from_nodes(std::move(nodes), grid.eps_end());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Integration by parts

struct IbpCase {
  CylinderFunctional F;
  CylinderFunctional G;
  CMDirection h;
  std::string label;
};

/// lhs = E[G dF(ũh) + F dG(ũh)], rhs = E[F G D_h] with D_h = divergence_direct.
/// All cases share the same bridge paths; weights are cached per direction.
inline std::vector<McReport> ibp_battery(const GeometryModel& geom, const std::vector<IbpCase>& cases,
                                         const TimeGrid& grid, const McSettings& s) {
  detail::Stopwatch clock;
  for (const auto& c : cases) {
    if (c.h.dim() != geom.dim()) throw InputError("direction dimension does not match geometry");
    if (!c.h.pinned()) throw InputError("integration by parts needs a pinned direction h(1) = 0");
    detail::require_times_on_grid(c.F, grid);
    detail::require_times_on_grid(c.G, grid);
  }
  // distinct directions by label
  std::vector<std::size_t> dir_of(cases.size());
  std::vector<const CMDirection*> dirs;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::size_t j = 0;
    while (j < dirs.size() && dirs[j]->label() != cases[i].h.label()) ++j;
    if (j == dirs.size()) dirs.push_back(&cases[i].h);
    dir_of[i] = j;
  }

  using Row = std::vector<std::array<double, 2>>;
  const auto results = with_dimension(geom.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    return run_paths<Row>(s.n_paths, s.jobs, [&](std::size_t i) {
      const auto path = detail::sample_path<N>(geom, grid, s, i, PathKind::bridge);
      std::vector<double> weight;
      for (const auto* h : dirs) weight.push_back(divergence_direct<N>(geom, path, *h).total);
      Row row;
      for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& k = cases[c];
        const double f = k.F.slots() ? k.F.value(detail::slot_points<N>(k.F, path)) : k.F.value({});
        const double g = k.G.slots() ? k.G.value(detail::slot_points<N>(k.G, path)) : k.G.value({});
        const double lhs = g * differential_along<N>(k.F, path, k.h) + f * differential_along<N>(k.G, path, k.h);
        row.push_back({lhs, f * g * weight[dir_of[c]]});
      }
      return row;
    });
  });

  const auto rows = results.successes();
  std::vector<McReport> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::vector<double> lhs, rhs;
    lhs.reserve(rows.size());
    rhs.reserve(rows.size());
    for (const auto& r : rows) {
      lhs.push_back(r[c][0]);
      rhs.push_back(r[c][1]);
    }
    auto rep = detail::new_report(cases[c].label.empty()
                                      ? "ibp[" + cases[c].F.label() + "," + cases[c].G.label() + "," +
                                            cases[c].h.label() + "]"
                                      : cases[c].label,
                                  grid, s);
    fill_estimates(rep, lhs, rhs, true);
    rep.n_paths = rows.size();
    rep.n_failed = results.failed;
    rep.wall_time = clock.seconds();
    out.push_back(std::move(rep));
  }
  return out;
}

inline McReport ibp_check(const GeometryModel& geom, const CylinderFunctional& F, const CylinderFunctional& G,
                          const CMDirection& h, const TimeGrid& grid, const McSettings& s) {
  return ibp_battery(geom, {IbpCase{F, G, h, ""}}, grid, s).front();
}

/// E[divergence_direct.total] against 0 (the F = G = 1 instance).
inline McReport divergence_mean_check(const GeometryModel& geom, const CMDirection& h, const TimeGrid& grid,
                                      const McSettings& s) {
  const auto one = CylinderFunctional::constant(1.0);
  auto rep = ibp_battery(geom, {IbpCase{one, one, h, "divergence_mean[" + h.label() + "]"}}, grid, s).front();
  return rep;
}

// ---------------------------------------------------------------------------
// Girsanov density

/// lhs = E_free[M_t F], rhs = E_bridge[F] with common random numbers, where
/// M_t = k_{1-t}(x_t)/k_1(x_0) exp(-∫_0^t Φ(x_s) ds) (trapezoid rule).
/// Extras carry E[M_t], its standard error and z against 1.
inline McReport girsanov_check(const GeometryModel& geom, double t, const CylinderFunctional& F,
                               const TimeGrid& grid, const McSettings& s) {
  detail::Stopwatch clock;
  if (!(t > 0.0) || t > grid.back() + 1e-12) throw InputError("girsanov time must lie in (0, 1 - eps_end]");
  if (!F.times().empty() && F.times().back() > t + 1e-12)
    throw InputError("girsanov test functional must only use times <= t");
  const std::size_t k_end = grid.nearest_node(t);
  if (k_end == 0) throw InputError("girsanov time rounds to the start of the grid");
  const TimeGrid sub = detail::truncated(grid, k_end);
  const double t_node = grid[k_end];

  using Row = std::array<double, 3>;  // M, M F(free), F(bridge)
  const auto results = with_dimension(geom.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    const ChartPoint<N> x0 = start_point(geom, s);
    const double log_k0 = log_k_data<N>(geom, 1.0, x0).log_k;
    return run_paths<Row>(s.n_paths, s.jobs, [&](std::size_t i) {
      auto inc = detail::path_increments<N>(grid, s, i, geom.dim());
      inc.resize(k_end);
      const std::span<const Vec<N>> span(inc);
      const auto free = simulate_bm<N>(geom, x0, sub, span);
      const auto bridge = simulate_bridge<N>(geom, x0, sub, span);
      double phi_integral = 0.0;
      double phi_prev = phi_data<N>(geom, free.states[0].point).phi;
      for (std::size_t k = 0; k < k_end; ++k) {
        const double phi_next = phi_data<N>(geom, free.states[k + 1].point).phi;
        phi_integral += 0.5 * (phi_prev + phi_next) * sub.dt(k);
        phi_prev = phi_next;
      }
      const double log_m = log_k_data<N>(geom, 1.0 - t_node, free.states.back().point).log_k - log_k0 - phi_integral;
      const double m = std::exp(log_m);
      if (!std::isfinite(m)) throw SimulationError(k_end, "non-finite Girsanov density");
      const double f_free = F.slots() ? F.value(detail::slot_points<N>(F, free)) : F.value({});
      const double f_bridge = F.slots() ? F.value(detail::slot_points<N>(F, bridge)) : F.value({});
      return Row{m, m * f_free, f_bridge};
    });
  });

  const auto rows = results.successes();
  std::vector<double> m, lhs, rhs;
  for (const auto& r : rows) {
    m.push_back(r[0]);
    lhs.push_back(r[1]);
    rhs.push_back(r[2]);
  }
  char tag[32];
  std::snprintf(tag, sizeof tag, "%g", t);
  auto rep = detail::new_report(std::string("girsanov[t=") + tag + "," + F.label() + "]", grid, s);
  fill_estimates(rep, lhs, rhs, true);
  const auto ms = sample_stats(m);
  rep.extras["t_node"] = t_node;
  rep.extras["mean_M"] = ms.mean;
  rep.extras["se_M"] = ms.se;
  rep.extras["z_M"] = z_value(ms.mean - 1.0, ms.se);
  rep.n_paths = rows.size();
  rep.n_failed = results.failed;
  rep.wall_time = clock.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Radial law

/// Per slice t: E[r] and E[r^2] of the bridge (lhs) against the Bessel-bridge
/// oracle with the same (n, r0) (rhs, independent stream). Extras give the
/// exact Bessel-bridge second moment (1-t)^2 r0^2 + n t (1-t) and, for a > 0,
/// the empirical exponential moment E[exp(2 a r_t^2)].
inline std::vector<McReport> radial_law_check(const GeometryModel& geom, const std::vector<double>& slices,
                                              const TimeGrid& grid, const McSettings& s) {
  detail::Stopwatch clock;
  std::vector<std::size_t> nodes;
  for (double t : slices) {
    if (!(t > 0.0)) throw InputError("radial slices must be > 0");
    nodes.push_back(grid.nearest_node(t));
  }
  const double r0 = start_point(geom, s).norm();
  const int n = geom.dim();

  using Row = std::vector<std::array<double, 2>>;  // (bridge r, bessel r) per slice
  const auto results = with_dimension(n, [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    return run_paths<Row>(s.n_paths, s.jobs, [&](std::size_t i) {
      const auto path = detail::sample_path<N>(geom, grid, s, i, PathKind::bridge);
      auto rng = path_stream(s.seed, i, StreamTag::bessel);
      const auto bessel = simulate_bessel_bridge(n, r0, grid, rng);
      Row row;
      for (auto k : nodes) row.push_back({path.states[k].point.norm(), bessel[k]});
      return row;
    });
  });

  const auto rows = results.successes();
  const double a = geom.growth_constant();
  std::vector<McReport> out;
  for (std::size_t j = 0; j < slices.size(); ++j) {
    const double t = grid[nodes[j]];
    std::vector<double> br, be, br2, be2, expo;
    for (const auto& r : rows) {
      br.push_back(r[j][0]);
      be.push_back(r[j][1]);
      br2.push_back(r[j][0] * r[j][0]);
      be2.push_back(r[j][1] * r[j][1]);
      if (a > 0.0) expo.push_back(std::exp(2.0 * a * r[j][0] * r[j][0]));
    }
    char tag[32];
    std::snprintf(tag, sizeof tag, "%g", slices[j]);
    for (int moment : {1, 2}) {
      auto rep = detail::new_report(std::string(moment == 1 ? "radial_mean" : "radial_m2") + "[t=" + tag + "]",
                                    grid, s);
      fill_estimates(rep, moment == 1 ? br : br2, moment == 1 ? be : be2, false);
      rep.extras["t_node"] = t;
      if (moment == 2) {
        const double exact = (1 - t) * (1 - t) * r0 * r0 + n * t * (1 - t);
        rep.extras["exact_m2"] = exact;
        rep.extras["z_bridge_vs_exact"] = z_value(rep.estimate_lhs - exact, rep.se_lhs);
        rep.extras["z_oracle_vs_exact"] = z_value(rep.estimate_rhs - exact, rep.se_rhs);
      }
      if (a > 0.0 && moment == 2) {
        const auto es = sample_stats(expo);
        rep.extras["exp_moment"] = es.mean;
        rep.extras["exp_moment_se"] = es.se;
      }
      rep.n_paths = rows.size();
      rep.n_failed = results.failed;
      rep.wall_time = clock.seconds();
      out.push_back(std::move(rep));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint decay

struct DecayRow {
  double t = 0.0;
  double t_node = 0.0;
  double m = 0.0;
  double se = 0.0;
};

struct DecayTable {
  std::string label;
  std::vector<DecayRow> rows;
  std::vector<double> margins;  // (m_j - m_{j+1}) / combined SE
  bool pinned = true;
  std::size_t n_paths = 0;
  std::size_t n_failed = 0;
  GridMeta grid;
  std::uint64_t seed = 0;
  double wall_time = 0.0;

  /// Strictly decreasing with every step exceeding `threshold` combined SEs.
  bool decreasing(double threshold = 3.0) const {
    if (margins.empty()) return false;
    for (double z : margins)
      if (!(z > threshold)) return false;
    return true;
  }
};

/// m(t) = E[⟨∇log k_{1-t}(x̃_t), ũ_t h(t)⟩^2] at each t.
inline DecayTable endpoint_decay_check(const GeometryModel& geom, const CMDirection& h, const std::vector<double>& ts,
                                       const TimeGrid& grid, const McSettings& s) {
  detail::Stopwatch clock;
  if (h.dim() != geom.dim()) throw InputError("direction dimension does not match geometry");
  for (double t : ts)
    if (!(t > 0.0) || t > grid.back() + 1e-12) throw InputError("decay times must lie in (0, 1 - eps_end]");

  using Row = std::vector<double>;
  const auto results = with_dimension(geom.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    return run_paths<Row>(s.n_paths, s.jobs, [&](std::size_t i) {
      const auto path = detail::sample_path<N>(geom, grid, s, i, PathKind::bridge);
      Row row;
      for (double t : ts) {
        const double y = endpoint_pairing<N>(geom, path, h, t);
        row.push_back(y * y);
      }
      return row;
    });
  });

  const auto rows = results.successes();
  DecayTable table;
  table.label = "endpoint_decay[" + h.label() + "]";
  table.pinned = h.pinned();
  for (std::size_t j = 0; j < ts.size(); ++j) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[j]);
    const auto st = sample_stats(v);
    table.rows.push_back({ts[j], grid[grid.nearest_node(ts[j])], st.mean, st.se});
  }
  for (std::size_t j = 0; j + 1 < table.rows.size(); ++j) {
    const auto& a = table.rows[j];
    const auto& b = table.rows[j + 1];
    table.margins.push_back(z_value(a.m - b.m, std::sqrt(a.se * a.se + b.se * b.se)));
  }
  table.n_paths = rows.size();
  table.n_failed = results.failed;
  table.grid = grid_meta(grid);
  table.seed = s.seed;
  table.wall_time = clock.seconds();
  return table;
}

// ---------------------------------------------------------------------------
// Representation equivalence

struct EquivRow {
  std::size_t steps = 0;
  double mean_gap = 0.0;
  double se_gap = 0.0;
  double mean_direct = 0.0;
  double mean_lemma = 0.0;
};

struct EquivReport {
  std::string label;
  std::vector<EquivRow> rows;  // coarse to fine
  std::size_t n_paths = 0;
  std::size_t n_failed = 0;
  GridMeta grid;
  std::uint64_t seed = 0;
  double wall_time = 0.0;

  bool monotone() const {
    if (rows.size() < 2) return false;
    for (std::size_t j = 0; j + 1 < rows.size(); ++j)
      if (!(rows[j + 1].mean_gap < rows[j].mean_gap)) return false;
    return true;
  }
};

/// Mean |divergence_direct - divergence_lemma1| on base, base/2, ..., base/2^halvings,
/// every resolution driven by the same Brownian path.
inline EquivReport representation_equiv_check(const GeometryModel& geom, const CMDirection& h,
                                              const TimeGrid& base, int halvings, const McSettings& s) {
  detail::Stopwatch clock;
  if (halvings < 1) throw InputError("equivalence check needs at least one halving");
  if (h.dim() != geom.dim()) throw InputError("direction dimension does not match geometry");
  std::vector<TimeGrid> grids{base};
  for (int l = 0; l < halvings; ++l) grids.push_back(grids.back().halved());

  using Row = std::vector<std::array<double, 3>>;  // (gap, direct, lemma) per level
  const auto results = with_dimension(geom.dim(), [&](auto dim_tag) {
    constexpr int N = decltype(dim_tag)::value;
    return run_paths<Row>(s.n_paths, s.jobs, [&](std::size_t i) {
      Row row;
      for (int l = 0; l <= halvings; ++l) {
        McSettings level = s;
        level.coupling_levels = halvings - l;
        const auto path = detail::sample_path<N>(geom, grids[l], level, i, PathKind::bridge);
        const double d = divergence_direct<N>(geom, path, h).total;
        const double e = divergence_lemma1<N>(geom, path, h).total;
        row.push_back({std::abs(d - e), d, e});
      }
      return row;
    });
  });

  const auto rows = results.successes();
  EquivReport rep;
  rep.label = "representation_equiv[" + h.label() + "]";
  for (int l = 0; l <= halvings; ++l) {
    std::vector<double> gap, d, e;
    for (const auto& r : rows) {
      gap.push_back(r[l][0]);
      d.push_back(r[l][1]);
      e.push_back(r[l][2]);
    }
    const auto gs = sample_stats(gap);
    rep.rows.push_back({grids[l].steps(), gs.mean, gs.se, sample_stats(d).mean, sample_stats(e).mean});
  }
  rep.n_paths = rows.size();
  rep.n_failed = results.failed;
  rep.grid = grid_meta(base);
  rep.seed = s.seed;
  rep.wall_time = clock.seconds();
  return rep;
}

}  // namespace polebridge
