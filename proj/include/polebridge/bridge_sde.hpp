#pragma once

// Horizontal frame-bundle SDE in the normal chart:
//   dx^k = (u ∘ dB)^k + A^k ds,   du^k_a = -Γ^k_ij(x) ∘dx^i u^j_a,
// with A = ∇ log k_{1-s} for the semi-classical bridge and A = 0 for Brownian
// motion. The diffusion part is Stratonovich (Heun predictor-corrector); the
// drift is evaluated at the left endpoint.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "polebridge/geometry.hpp"
#include "polebridge/rng.hpp"
#include "polebridge/time_grid.hpp"

namespace polebridge {

inline constexpr double kBesselFloor = 1e-10;

template <int N>
struct FrameState {
  ChartPoint<N> point;
  Mat<N> frame;  // columns are g-orthonormal frame vectors
};

enum class PathKind { bridge, free };

template <int N>
struct FramePathSample {
  TimeGrid grid;
  std::vector<FrameState<N>> states;  // one per grid node
  std::vector<Vec<N>> dB;             // one per grid interval
  std::vector<Vec<N>> dB_tilde;       // anti-development increments of the path
  PathKind kind = PathKind::bridge;

  std::size_t dim() const { return states.empty() ? 0 : static_cast<std::size_t>(states.front().point.size()); }

  /// State at the grid node nearest to t.
  const FrameState<N>& state_at_time(double t) const { return states[grid.nearest_node(t)]; }

  /// Position at time t; bridges are pinned to the pole at t = 1.
  ChartPoint<N> point_at_time(double t) const {
    if (kind == PathKind::bridge && t >= 1.0) return ChartPoint<N>::Zero(states.front().point.size());
    return state_at_time(t).point;
  }
};

/// max |u^T G u - I|.
template <int N>
double orthonormality_defect(const GeometryModel& geom, const FrameState<N>& state) {
  const Mat<N> g = metric_at<N>(geom, state.point);
  const int n = geom.dim();
  return (state.frame.transpose() * g * state.frame - Mat<N>::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// Modified Gram-Schmidt in the g-inner product at state.point.
template <int N>
FrameState<N> reorthonormalize(const GeometryModel& geom, const FrameState<N>& state) {
  FrameState<N> out = state;
  const int n = geom.dim();
  // g(v, w) = (n·v)(n·w) + ψ (v·w - (n·v)(n·w)), with ψ evaluated once
  const double r = state.point.norm();
  const bool at_pole = r < kPoleRadius;
  const Vec<N> unit = at_pole ? Vec<N>(Vec<N>::Zero(n)) : Vec<N>(state.point / r);
  const double rho = at_pole ? 1.0 : 1.0 + geom.radial_terms(r).ratio_m1;
  const double psi = rho * rho;
  auto inner = [&](const Vec<N>& v, const Vec<N>& w) {
    const double vn = unit.dot(v);
    const double wn = unit.dot(w);
    return vn * wn + psi * (v.dot(w) - vn * wn);
  };
  for (int a = 0; a < n; ++a) {
    Vec<N> v = out.frame.col(a);
    for (int b = 0; b < a; ++b) {
      const Vec<N> e = out.frame.col(b);
      v -= inner(e, v) * e;
    }
    const double norm2 = inner(v, v);
    const double scale = std::max(1.0, state.frame.col(a).squaredNorm());
    if (!(norm2 > 1e-24 * scale) || !std::isfinite(norm2))
      throw NumericalError("frame is singular; cannot orthonormalize");
    out.frame.col(a) = v / std::sqrt(norm2);
  }
  return out;
}

/// g-orthonormal frame at x0 obtained from the coordinate basis.
template <int N>
FrameState<N> initial_frame(const GeometryModel& geom, const ChartPoint<N>& x0) {
  const int n = geom.dim();
  return reorthonormalize<N>(geom, FrameState<N>{x0, Mat<N>::Identity(n, n)});
}

/// One Stratonovich-Heun step. Does not re-orthonormalize.
template <int N>
FrameState<N> horizontal_heun_step(const GeometryModel& geom, const FrameState<N>& state, const Vec<N>& dB,
                                   double dt, const std::optional<Vec<N>>& drift) {
  const ChartPoint<N>& x = state.point;
  const Mat<N>& u = state.frame;
  const int n = geom.dim();

  const Vec<N> noise = u * dB;
  const Vec<N> drift_dx = drift ? Vec<N>(*drift * dt) : Vec<N>(Vec<N>::Zero(n));

  const Mat<N> conn_noise = christoffel_contract_frame<N>(geom, x, noise, u);
  const Mat<N> conn_drift =
      drift ? christoffel_contract_frame<N>(geom, x, drift_dx, u) : Mat<N>(Mat<N>::Zero(n, n));

  const ChartPoint<N> x_pred = x + noise + drift_dx;
  const Mat<N> u_pred = u - conn_noise - conn_drift;

  const Vec<N> noise_pred = u_pred * dB;
  FrameState<N> next;
  next.point = x + 0.5 * (noise + noise_pred) + drift_dx;
  next.frame = u - 0.5 * (conn_noise + christoffel_contract_frame<N>(geom, x_pred, noise_pred, u_pred)) - conn_drift;
  return next;
}

/// Brownian increments √dt_k Z_k for every interval of `grid`.
template <int N>
std::vector<Vec<N>> draw_increments(const TimeGrid& grid, PathRng& rng, int dim) {
  StandardNormal normal;
  std::vector<Vec<N>> out;
  out.reserve(grid.steps());
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double sd = std::sqrt(grid.dt(k));
    Vec<N> v(dim);
    for (int i = 0; i < dim; ++i) v(i) = sd * normal(rng);
    out.push_back(v);
  }
  return out;
}

/// Increments on `grid` aggregated from a path drawn on grid.halved()^levels,
/// so runs at different resolutions can share one Brownian path.
template <int N>
std::vector<Vec<N>> coupled_increments(const TimeGrid& grid, PathRng& rng, int dim, int levels) {
  TimeGrid fine = grid;
  for (int l = 0; l < levels; ++l) fine = fine.halved();
  auto inc = draw_increments<N>(fine, rng, dim);
  for (int l = 0; l < levels; ++l) {
    std::vector<Vec<N>> coarse;
    coarse.reserve(inc.size() / 2);
    for (std::size_t k = 0; k + 1 < inc.size(); k += 2) coarse.push_back(inc[k] + inc[k + 1]);
    inc = std::move(coarse);
  }
  return inc;
}

namespace detail {

template <int N>
FramePathSample<N> integrate_path(const GeometryModel& geom, const ChartPoint<N>& x0, const TimeGrid& grid,
                                  std::span<const Vec<N>> increments, PathKind kind) {
  require_point(geom, x0);
  if (increments.size() != grid.steps()) throw InputError("increment count does not match the time grid");
  if (kind == PathKind::bridge && x0.norm() < kPoleRadius)
    throw InputError("bridge must start away from the pole");

  FramePathSample<N> path;
  path.grid = grid;
  path.kind = kind;
  path.states.reserve(grid.steps() + 1);
  path.dB.assign(increments.begin(), increments.end());
  path.dB_tilde.reserve(grid.steps());
  path.states.push_back(initial_frame<N>(geom, x0));

  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const FrameState<N>& s = path.states.back();
    const double dt = grid.dt(k);
    std::optional<Vec<N>> drift;
    if (kind == PathKind::bridge) {
      drift = grad_log_k<N>(geom, 1.0 - grid[k], s.point);
      // dB̃ = dB + u^{-1} ∇log k dt, u^{-1} = u^T G
      const Vec<N> g_drift = metric_at<N>(geom, s.point) * *drift;
      path.dB_tilde.push_back(increments[k] + s.frame.transpose() * g_drift * dt);
    } else {
      path.dB_tilde.push_back(increments[k]);
    }
    FrameState<N> next = horizontal_heun_step<N>(geom, s, increments[k], dt, drift);
    if (!next.point.allFinite() || !next.frame.allFinite())
      throw SimulationError(k, "non-finite state");
    try {
      next = reorthonormalize<N>(geom, next);
    } catch (const NumericalError& e) {
      throw SimulationError(k, e.what());
    }
    path.states.push_back(std::move(next));
  }
  return path;
}

}  // namespace detail

template <int N>
FramePathSample<N> simulate_bridge(const GeometryModel& geom, const ChartPoint<N>& x0, const TimeGrid& grid,
                                   std::span<const Vec<N>> increments) {
  return detail::integrate_path<N>(geom, x0, grid, increments, PathKind::bridge);
}

/// Semi-classical bridge from x0 to the pole, integrated up to 1 - eps_end.
template <int N>
FramePathSample<N> simulate_bridge(const GeometryModel& geom, const ChartPoint<N>& x0, const TimeGrid& grid,
                                   PathRng& rng) {
  const auto inc = draw_increments<N>(grid, rng, geom.dim());
  return simulate_bridge<N>(geom, x0, grid, std::span<const Vec<N>>(inc));
}

template <int N>
FramePathSample<N> simulate_bm(const GeometryModel& geom, const ChartPoint<N>& x0, const TimeGrid& grid,
                               std::span<const Vec<N>> increments) {
  return detail::integrate_path<N>(geom, x0, grid, increments, PathKind::free);
}

/// Brownian motion on the manifold (horizontal SDE without drift).
template <int N>
FramePathSample<N> simulate_bm(const GeometryModel& geom, const ChartPoint<N>& x0, const TimeGrid& grid,
                               PathRng& rng) {
  const auto inc = draw_increments<N>(grid, rng, geom.dim());
  return simulate_bm<N>(geom, x0, grid, std::span<const Vec<N>>(inc));
}

/// Euler path of the n-dimensional Bessel bridge from r0 to 0:
///   dr = dβ + ((n-1)/(2r) - r/(1-t)) dt.
/// The singular (n-1)/(2r) term is taken at the new point, so each step solves
/// r' = b + (n-1) dt / (2 r') for its positive root; an explicit step would
/// explode after landing near 0. Reflection and kBesselFloor guard n = 1.
inline std::vector<double> simulate_bessel_bridge(int n, double r0, const TimeGrid& grid, PathRng& rng) {
  if (n < 1) throw InputError("dimension must be >= 1");
  if (!(r0 > 0.0) || !std::isfinite(r0)) throw InputError("Bessel bridge needs r0 > 0");
  StandardNormal normal;
  std::vector<double> r;
  r.reserve(grid.steps() + 1);
  r.push_back(r0);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double dt = grid.dt(k);
    const double rk = r.back();
    const double b = rk + std::sqrt(dt) * normal(rng) - rk / (1.0 - grid[k]) * dt;
    const double next = n > 1 ? 0.5 * (b + std::sqrt(b * b + 2.0 * (n - 1) * dt)) : std::abs(b);
    r.push_back(std::max(next, kBesselFloor));
  }
  return r;
}

}  // namespace polebridge
