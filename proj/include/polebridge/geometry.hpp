#pragma once

// Rotationally symmetric manifolds with a pole, in the global normal chart at
// the pole. The metric in geodesic polar coordinates is g = dr^2 + f(r)^2 dθ^2;
// in Cartesian normal coordinates x (r = |x|, n = x/r, P = n n^T, Q = I - P)
//
//   g = P + ψ Q,   ψ = (f/r)^2.
//
// Every profile is described by two stable radial functions:
//   ratio_m1 = f/r - 1,   a = (log(f/r))' = f'/f - 1/r,
// together with a', a''. Everything else is derived from those, so no quantity
// has to cancel 1/r singularities near the pole.

#include <array>
#include <atomic>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "polebridge/errors.hpp"

namespace polebridge {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

template <int N>
using ChartPoint = Vec<N>;
template <int N>
using MetricMatrix = Mat<N>;

// Γ[k](i, j) = Γ^k_ij.
template <int N>
using Christoffel = std::vector<Mat<N>>;

inline constexpr double kPoleRadius = 1e-8;

struct RadialTerms {
  double ratio_m1 = 0.0;  // f/r - 1
  double a = 0.0;         // f'/f - 1/r
  double da = 0.0;
  double d2a = 0.0;
};

struct FlatProfile {
  RadialTerms operator()(double) const { return {}; }
};

// f(r) = sinh(c r) / c
struct SinhProfile {
  double c = 1.0;

  RadialTerms operator()(double r) const {
    const double x = c * r;
    RadialTerms t;
    if (x < 0.05) {
      const double x2 = x * x;
      t.ratio_m1 = x2 * (1.0 / 6 + x2 * (1.0 / 120 + x2 * (1.0 / 5040 + x2 / 362880)));
      t.a = c * x * (1.0 / 3 + x2 * (-1.0 / 45 + x2 * (2.0 / 945 + x2 * (-1.0 / 4725 + x2 * 2.0 / 93555))));
      t.da = c * c * (1.0 / 3 + x2 * (-1.0 / 15 + x2 * (2.0 / 189 + x2 * (-1.0 / 675 + x2 * 2.0 / 10395))));
      t.d2a = c * c * c * x * (-2.0 / 15 + x2 * (8.0 / 189 + x2 * (-6.0 / 675 + x2 * 16.0 / 10395)));
      return t;
    }
    const double sh = std::sinh(x);
    const double coth = 1.0 / std::tanh(x);
    const double csch2 = 1.0 / (sh * sh);
    t.ratio_m1 = sh / x - 1.0;
    t.a = c * (coth - 1.0 / x);
    t.da = c * c * (1.0 / (x * x) - csch2);
    t.d2a = c * c * c * (2.0 * coth * csch2 - 2.0 / (x * x * x));
    return t;
  }
};

// f(r) = r + r^3/6: non-constant negative curvature.
struct CubicProfile {
  RadialTerms operator()(double r) const {
    const double r2 = r * r;
    const double d = 6.0 + r2;
    RadialTerms t;
    t.ratio_m1 = r2 / 6.0;
    t.a = 2.0 * r / d;
    t.da = (12.0 - 2.0 * r2) / (d * d);
    t.d2a = (4.0 * r2 * r - 72.0 * r) / (d * d * d);
    return t;
  }
};

// f(r) = r / sqrt(1 + r^2): positive curvature.
struct TaperedProfile {
  RadialTerms operator()(double r) const {
    const double r2 = r * r;
    const double s = std::sqrt(1.0 + r2);
    const double d = 1.0 + r2;
    RadialTerms t;
    t.ratio_m1 = -r2 / (s * (1.0 + s));
    t.a = -r / d;
    t.da = (r2 - 1.0) / (d * d);
    t.d2a = (6.0 * r - 2.0 * r2 * r) / (d * d * d);
    return t;
  }
};

using WarpProfile = std::variant<FlatProfile, SinhProfile, CubicProfile, TaperedProfile>;

enum class GeometryKind { euclidean, hyperbolic, warped };

inline const std::array<std::string_view, 3>& warped_profile_names() {
  static const std::array<std::string_view, 3> names{"flat", "cubic", "tapered"};
  return names;
}

/// Immutable descriptor of a rotationally symmetric manifold with a pole.
class GeometryModel {
 public:
  static GeometryModel euclidean(int dim, double growth_constant = 0.0) {
    return GeometryModel(dim, GeometryKind::euclidean, FlatProfile{}, 0.0, "", growth_constant);
  }

  static GeometryModel hyperbolic(int dim, double c, double growth_constant = 0.0) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("curvature scale c must be > 0");
    return GeometryModel(dim, GeometryKind::hyperbolic, SinhProfile{c}, c, "", growth_constant);
  }

  /// Named built-in warping profiles only: "flat", "cubic", "tapered".
  static GeometryModel warped(int dim, std::string_view profile, double growth_constant = 0.0) {
    if (profile == "flat")
      return GeometryModel(dim, GeometryKind::warped, FlatProfile{}, 0.0, "flat", growth_constant);
    if (profile == "cubic")
      return GeometryModel(dim, GeometryKind::warped, CubicProfile{}, 0.0, "cubic", growth_constant);
    if (profile == "tapered")
      return GeometryModel(dim, GeometryKind::warped, TaperedProfile{}, 0.0, "tapered", growth_constant);
    throw InputError("unknown warped profile '" + std::string(profile) +
                     "' (available: flat, cubic, tapered)");
  }

  int dim() const noexcept { return dim_; }
  GeometryKind kind() const noexcept { return kind_; }
  double curvature_scale() const noexcept { return c_; }
  double growth_constant() const noexcept { return growth_; }
  const std::string& profile_name() const noexcept { return profile_name_; }

  std::string describe() const {
    switch (kind_) {
      case GeometryKind::euclidean:
        return "euclidean(n=" + std::to_string(dim_) + ")";
      case GeometryKind::hyperbolic:
        return "hyperbolic(n=" + std::to_string(dim_) + ",c=" + format_double(c_) + ")";
      case GeometryKind::warped:
        return "warped(n=" + std::to_string(dim_) + "," + profile_name_ + ")";
    }
    return "?";
  }

  /// Radial terms at r. A few recent evaluations are memoized per thread, since
  /// one integration step asks for the same radius many times.
  RadialTerms radial_terms(double r) const {
    struct Memo {
      std::uint64_t owner = 0;
      double r = 0.0;
      RadialTerms terms;
    };
    if (std::holds_alternative<FlatProfile>(profile_)) return FlatProfile{}(r);
    thread_local std::array<Memo, 4> memo{};
    thread_local unsigned next_slot = 0;
    for (const auto& m : memo)
      if (m.owner == id_ && m.r == r) return m.terms;
    const RadialTerms t = std::visit([r](const auto& p) { return p(r); }, profile_);
    memo[next_slot++ % memo.size()] = {id_, r, t};
    return t;
  }

  // Warping function and derivatives, reconstructed from the stable terms.
  double f(double r) const { return r * (1.0 + radial_terms(r).ratio_m1); }

  double df(double r) const {
    const auto t = radial_terms(r);
    return (1.0 + t.ratio_m1) * (1.0 + r * t.a);
  }

  double d2f(double r) const {
    const auto t = radial_terms(r);
    return f(r) * (t.da + t.a * t.a + 2.0 * a_over_r(t, r));
  }

  // a(r)/r with its r -> 0 limit a'(0).
  static double a_over_r(const RadialTerms& t, double r) {
    return r < kPoleRadius ? t.da : t.a / r;
  }

 private:
  GeometryModel(int dim, GeometryKind kind, WarpProfile profile, double c, std::string name,
                double growth)
      : dim_(dim),
        kind_(kind),
        profile_(profile),
        c_(c),
        profile_name_(std::move(name)),
        growth_(growth),
        id_(next_id()) {
    if (dim < 1) throw InputError("dimension must be >= 1");
    if (!(growth >= 0.0) || !std::isfinite(growth))
      throw InputError("growth constant a must be finite and >= 0");
  }

  // Identifies the model in the radial memo; copies share it and are equal.
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  int dim_;
  GeometryKind kind_;
  WarpProfile profile_;
  double c_;
  std::string profile_name_;
  double growth_;
  std::uint64_t id_;
};

namespace detail {

template <int N>
void require_point(const GeometryModel& geom, const ChartPoint<N>& x) {
  if (x.size() != geom.dim()) throw InputError("chart point dimension does not match geometry");
  if (!x.allFinite()) throw InputError("non-finite chart coordinates");
}

// Radial decomposition of a chart point. At the pole `unit` is zero, so the
// projector P vanishes and Q is the identity; callers use pole limits there.
template <int N>
struct Polar {
  double r = 0.0;
  Vec<N> unit;
  RadialTerms terms;
  double psi = 1.0;  // (f/r)^2
  bool at_pole = true;

  Mat<N> P() const { return unit * unit.transpose(); }
  Mat<N> Q() const { return Mat<N>::Identity(unit.size(), unit.size()) - P(); }
};

template <int N>
Polar<N> polar(const GeometryModel& geom, const ChartPoint<N>& x) {
  Polar<N> p;
  p.r = x.norm();
  p.at_pole = p.r < kPoleRadius;
  p.unit = p.at_pole ? Vec<N>::Zero(x.size()) : Vec<N>(x / p.r);
  p.terms = geom.radial_terms(p.r);
  const double rho = 1.0 + p.terms.ratio_m1;
  p.psi = rho * rho;
  return p;
}

// (f f'/r - 1)/r = (ψ - 1)/r + ψ a
inline double b_coefficient(const RadialTerms& t, double r, double psi) {
  const double psi_m1 = t.ratio_m1 * (2.0 + t.ratio_m1);
  return psi_m1 / r + psi * t.a;
}

// ((f')^2 - 1)/f^2
inline double tangential_curvature_term(const RadialTerms& t, double r) {
  const double rho = 1.0 + t.ratio_m1;
  const double ar = GeometryModel::a_over_r(t, r);
  const double psi_m1_over_r2 =
      r < kPoleRadius ? t.da : t.ratio_m1 * (2.0 + t.ratio_m1) / (r * r);
  return t.a * t.a + 2.0 * ar + psi_m1_over_r2 / (rho * rho);
}

// Radial profile φ = log J and derivatives. φ' = (n-1) a, φ'' = (n-1) a'.
struct LogJacobianProfile {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

inline LogJacobianProfile log_jacobian_profile(int n, const RadialTerms& t) {
  const double m = n - 1;
  return {m * std::log1p(t.ratio_m1), m * t.a, m * t.da, m * t.d2a};
}

}  // namespace detail

/// Chart components g_ij of the metric. Identity at the pole.
template <int N>
MetricMatrix<N> metric_at(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  const int n = geom.dim();
  if (p.at_pole) return Mat<N>::Identity(n, n);
  return Mat<N>::Identity(n, n) + (p.psi - 1.0) * p.Q();
}

template <int N>
Mat<N> inverse_metric_at(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  const int n = geom.dim();
  if (p.at_pole) return Mat<N>::Identity(n, n);
  return p.P() + p.Q() / p.psi;
}

/// g(v, w) at x, without forming the matrix.
template <int N>
double metric_inner(const GeometryModel& geom, const ChartPoint<N>& x, const Vec<N>& v, const Vec<N>& w) {
  const double r = x.norm();
  if (r < kPoleRadius) return v.dot(w);
  const Vec<N> unit = x / r;
  const double rho = 1.0 + geom.radial_terms(r).ratio_m1;
  const double vn = unit.dot(v);
  const double wn = unit.dot(w);
  return vn * wn + rho * rho * (v.dot(w) - vn * wn);
}

/// Γ^k_ij = -B n_k Q_ij + a (n_i Q_kj + n_j Q_ki), B = (f f'/r - 1)/r.
/// Zero at the pole (limit value) for r < kPoleRadius.
template <int N>
Christoffel<N> christoffel_at(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const int n = geom.dim();
  Christoffel<N> gamma(n, Mat<N>::Zero(n, n));
  const auto p = detail::polar(geom, x);
  if (p.at_pole) return gamma;
  const double b = detail::b_coefficient(p.terms, p.r, p.psi);
  const Mat<N> q = p.Q();
  for (int k = 0; k < n; ++k) {
    gamma[k] = -b * p.unit(k) * q + p.terms.a * (p.unit * q.row(k) + q.col(k) * p.unit.transpose());
  }
  return gamma;
}

/// Γ(v, w)^k = Γ^k_ij v^i w^j in O(n).
template <int N>
Vec<N> christoffel_contract(const GeometryModel& geom, const ChartPoint<N>& x, const Vec<N>& v,
                            const Vec<N>& w) {
  const double r = x.norm();
  if (r < kPoleRadius) return Vec<N>::Zero(x.size());
  const Vec<N> unit = x / r;
  const auto t = geom.radial_terms(r);
  const double rho = 1.0 + t.ratio_m1;
  const double b = detail::b_coefficient(t, r, rho * rho);
  const double vn = unit.dot(v);
  const double wn = unit.dot(w);
  const Vec<N> qv = v - vn * unit;
  const Vec<N> qw = w - wn * unit;
  return -b * qv.dot(w) * unit + t.a * (vn * qw + wn * qv);
}

/// Γ(v, u) applied column-wise to a frame.
template <int N>
Mat<N> christoffel_contract_frame(const GeometryModel& geom, const ChartPoint<N>& x, const Vec<N>& v,
                                  const Mat<N>& u) {
  const double r = x.norm();
  if (r < kPoleRadius) return Mat<N>::Zero(u.rows(), u.cols());
  const Vec<N> unit = x / r;
  const auto t = geom.radial_terms(r);
  const double rho = 1.0 + t.ratio_m1;
  const double b = detail::b_coefficient(t, r, rho * rho);
  const double vn = unit.dot(v);
  const Vec<N> qv = v - vn * unit;
  const auto un = (unit.transpose() * u).eval();  // n·u_a per column
  // column a: -b (qv·u_a) n + a (vn Q u_a + (n·u_a) qv)
  return -b * unit * (qv.transpose() * u) + t.a * (vn * (u - unit * un) + qv * un);
}

struct RicciEigenvalues {
  double radial = 0.0;
  double tangential = 0.0;
};

template <int N>
RicciEigenvalues ricci_eigenvalues(const GeometryModel& geom, const ChartPoint<N>& x) {
  const int n = geom.dim();
  const double r = std::max(x.norm(), kPoleRadius);
  const auto t = geom.radial_terms(r);
  const double f2_over_f = t.da + t.a * t.a + 2.0 * GeometryModel::a_over_r(t, r);
  RicciEigenvalues ev;
  ev.radial = -(n - 1) * f2_over_f;
  ev.tangential = n > 1 ? -f2_over_f - (n - 2) * detail::tangential_curvature_term(t, r) : 0.0;
  return ev;
}

/// Chart matrix of Ric♯ (g-self-adjoint): radial eigenvalue -(n-1) f''/f,
/// tangential eigenvalue -f''/f - (n-2)((f')^2 - 1)/f^2.
template <int N>
Mat<N> ricci_sharp_at(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const int n = geom.dim();
  const auto ev = ricci_eigenvalues<N>(geom, x);
  const auto p = detail::polar(geom, x);
  if (p.at_pole) return ev.radial * Mat<N>::Identity(n, n);
  return ev.radial * p.P() + ev.tangential * p.Q();
}

template <int N>
struct RadialData {
  double r = 0.0;
  Vec<N> grad_r;
  Mat<N> hess_r;  // covariant chart components
};

/// Distance to the pole, its gradient and Hessian Hess r = (f'/f)(g - dr⊗dr).
template <int N>
RadialData<N> radial_data(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  if (p.at_pole) throw DegeneratePointError("distance function is not differentiable at the pole");
  RadialData<N> out;
  out.r = p.r;
  out.grad_r = p.unit;
  // (f'/f) ψ = (a + 1/r) ψ
  out.hess_r = (p.terms.a + 1.0 / p.r) * p.psi * p.Q();
  return out;
}

/// Δr = (n - 1) f'/f.
inline double laplacian_r(const GeometryModel& geom, double r) {
  if (r < kPoleRadius) throw DegeneratePointError("Δr is singular at the pole");
  return (geom.dim() - 1) * (geom.radial_terms(r).a + 1.0 / r);
}

template <int N>
struct JacobianData {
  double log_J = 0.0;
  Vec<N> grad_log_J;
  double lap_log_J = 0.0;
};

/// log J = (n-1) log(f/r); Δ log J = φ'' + Δr φ'.
template <int N>
JacobianData<N> jacobian_data(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  const int n = geom.dim();
  const auto phi = detail::log_jacobian_profile(n, p.terms);
  JacobianData<N> out;
  out.log_J = phi.value;
  out.grad_log_J = phi.d1 * p.unit;
  // Δr φ' = (n-1)(a + 1/r) (n-1) a
  const double ar = GeometryModel::a_over_r(p.terms, p.r);
  out.lap_log_J = phi.d2 + (n - 1) * (p.terms.a * phi.d1 + (n - 1) * ar);
  return out;
}

/// Covariant Hessian of log J: φ'' dr⊗dr + φ' (f'/f) ψ Q.
template <int N>
Mat<N> hess_log_jacobian(const GeometryModel& geom, const ChartPoint<N>& x) {
  const auto p = detail::polar(geom, x);
  const int n = geom.dim();
  const double m = n - 1;
  const double ar = GeometryModel::a_over_r(p.terms, p.r);
  // φ' (a + 1/r) ψ = m (a^2 + a/r) ψ
  const double tangential = m * (p.terms.a * p.terms.a + ar) * p.psi;
  if (p.at_pole) return tangential * Mat<N>::Identity(n, n);
  return m * p.terms.da * p.P() + tangential * p.Q();
}

template <int N>
struct PhiData {
  double phi = 0.0;
  Vec<N> grad_phi;
};

/// Radial profile of Φ = (1/8)|∇log J|^2 - (1/4)Δ log J and its r-derivative.
inline std::array<double, 2> phi_profile(int n, const RadialTerms& t, double r) {
  const double m = n - 1;
  const double a = t.a;
  const double ar = GeometryModel::a_over_r(t, r);
  const double phi = m * m * a * a / 8.0 - m / 4.0 * (t.da + m * (a * a + ar));
  if (r < kPoleRadius) return {phi, 0.0};
  // d/dr [(a + 1/r) a] = 2 a a' + (r a' - a)/r^2
  const double bracket = 2.0 * a * t.da + (t.da - ar) / r;
  const double dphi = m * m * a * t.da / 4.0 - m / 4.0 * (t.d2a + m * bracket);
  return {phi, dphi};
}

template <int N>
PhiData<N> phi_data(const GeometryModel& geom, const ChartPoint<N>& x) {
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  const auto prof = phi_profile(geom.dim(), p.terms, p.r);
  return {prof[0], prof[1] * p.unit};
}

template <int N>
struct LogKernelData {
  double log_k = 0.0;
  Vec<N> grad_log_k;
  Mat<N> hess_log_k;  // covariant chart components
  double dtime_log_k = 0.0;
  double lap_log_k = 0.0;
};

namespace detail {

inline void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("remaining time tau must be > 0");
}

}  // namespace detail

/// log k_τ(x) = -(n/2) log(2πτ) - r^2/(2τ) - (1/2) log J with spatial derivatives
/// and ∂_s log k_{1-s} at τ = 1 - s.
template <int N>
LogKernelData<N> log_k_data(const GeometryModel& geom, double tau, const ChartPoint<N>& x) {
  detail::require_tau(tau);
  detail::require_point(geom, x);
  const auto p = detail::polar(geom, x);
  const int n = geom.dim();
  const auto phi = detail::log_jacobian_profile(n, p.terms);
  const double r2 = p.r * p.r;

  LogKernelData<N> out;
  out.log_k = -0.5 * n * std::log(2.0 * std::numbers::pi * tau) - r2 / (2.0 * tau) - 0.5 * phi.value;
  out.grad_log_k = -x / tau - 0.5 * phi.d1 * p.unit;
  // Hess(r^2/2) = P + ψ (1 + r a) Q
  const Mat<N> id = Mat<N>::Identity(n, n);
  const Mat<N> hess_half_r2 = p.at_pole ? id : Mat<N>(p.P() + p.psi * (1.0 + p.r * p.terms.a) * p.Q());
  out.hess_log_k = -hess_half_r2 / tau - 0.5 * hess_log_jacobian<N>(geom, x);
  out.dtime_log_k = n / (2.0 * tau) - r2 / (2.0 * tau * tau);
  // Δ(r^2/2) = 1 + r Δr = n + (n-1) r a
  const double lap_half_r2 = n + (n - 1) * p.r * p.terms.a;
  const double ar = GeometryModel::a_over_r(p.terms, p.r);
  const double lap_log_J = phi.d2 + (n - 1) * (p.terms.a * phi.d1 + (n - 1) * ar);
  out.lap_log_k = -lap_half_r2 / tau - 0.5 * lap_log_J;
  return out;
}

/// Riemannian gradient of log k_τ only (hot path of the bridge drift).
template <int N>
Vec<N> grad_log_k(const GeometryModel& geom, double tau, const ChartPoint<N>& x) {
  const double r = x.norm();
  if (r < kPoleRadius) return Vec<N>::Zero(x.size());
  const double a = geom.radial_terms(r).a;
  return -x / tau - 0.5 * (geom.dim() - 1) * a * (x / r);
}

}  // namespace polebridge
