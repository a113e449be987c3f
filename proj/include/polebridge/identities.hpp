#pragma once

// Finite-difference oracles for the closed-form geometry, and the
// deterministic identity suite built on them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polebridge/geometry.hpp"
#include "polebridge/rng.hpp"

namespace polebridge {

inline constexpr double kFdStepFirst = 1e-4;
inline constexpr double kFdStepSecond = 1e-3;

/// |value - reference| / max(|reference|, 1).
inline double relative_error(double value, double reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), 1.0);
}

template <class Derived, class Other>
double relative_error_max(const Eigen::MatrixBase<Derived>& value, const Eigen::MatrixBase<Other>& reference) {
  const double scale = std::max(reference.cwiseAbs().maxCoeff(), 1.0);
  return (value - reference).cwiseAbs().maxCoeff() / scale;
}

namespace fd {

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

/// Five-point central difference of s -> v(s) at s = 0.
template <class F>
double derivative(F&& v, double h = kFdStepFirst) {
  return (8.0 * (v(h) - v(-h)) - (v(2.0 * h) - v(-2.0 * h))) / (12.0 * h);
}

inline Eigen::VectorXd gradient(const ScalarField& u, const Eigen::VectorXd& x, double h = kFdStepFirst) {
  Eigen::VectorXd out(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out(i) = derivative([&](double s) {
      p(i) = x(i) + s;
      const double v = u(p);
      p(i) = x(i);
      return v;
    }, h);
  }
  return out;
}

inline Eigen::MatrixXd hessian(const ScalarField& u, const Eigen::VectorXd& x, double h = kFdStepSecond) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd out(n, n);
  const double u0 = u(x);
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = x(i) + h;
    const double up = u(p);
    p(i) = x(i) - h;
    const double down = u(p);
    p(i) = x(i);
    out(i, i) = (up - 2.0 * u0 + down) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          p(i) = x(i) + si * h;
          p(j) = x(j) + sj * h;
          acc += si * sj * u(p);
        }
      p(i) = x(i);
      p(j) = x(j);
      out(i, j) = out(j, i) = acc / (4.0 * h * h);
    }
  }
  return out;
}

/// Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il - ∂_l g_ij) with ∂g by central differences.
inline Christoffel<Eigen::Dynamic> christoffel(const GeometryModel& geom, const Eigen::VectorXd& x,
                                               double h = kFdStepFirst) {
  const int n = geom.dim();
  std::vector<Eigen::MatrixXd> dg(n);  // dg[l] = ∂_l g
  Eigen::VectorXd p = x;
  for (int l = 0; l < n; ++l) {
    p(l) = x(l) + h;
    const Eigen::MatrixXd up = metric_at<Eigen::Dynamic>(geom, p);
    p(l) = x(l) - h;
    const Eigen::MatrixXd down = metric_at<Eigen::Dynamic>(geom, p);
    p(l) = x(l);
    dg[l] = (up - down) / (2.0 * h);
  }
  const Eigen::MatrixXd ginv = metric_at<Eigen::Dynamic>(geom, x).inverse();
  Christoffel<Eigen::Dynamic> out(n, Eigen::MatrixXd::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        out[k](i, j) = 0.5 * acc;
      }
  return out;
}

/// Ric♯ from central differences of the closed-form Christoffel symbols:
/// Ric_jk = ∂_i Γ^i_jk - ∂_k Γ^i_ji + Γ^i_ip Γ^p_jk - Γ^i_kp Γ^p_ji.
inline Eigen::MatrixXd ricci_sharp(const GeometryModel& geom, const Eigen::VectorXd& x, double h = kFdStepFirst) {
  const int n = geom.dim();
  std::vector<Christoffel<Eigen::Dynamic>> dgamma(n);  // dgamma[l][k] = ∂_l Γ^k
  Eigen::VectorXd p = x;
  for (int l = 0; l < n; ++l) {
    p(l) = x(l) + h;
    const auto up = christoffel_at<Eigen::Dynamic>(geom, p);
    p(l) = x(l) - h;
    const auto down = christoffel_at<Eigen::Dynamic>(geom, p);
    p(l) = x(l);
    dgamma[l].resize(n);
    for (int k = 0; k < n; ++k) dgamma[l][k] = (up[k] - down[k]) / (2.0 * h);
  }
  const auto gam = christoffel_at<Eigen::Dynamic>(geom, x);
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dgamma[i][i](j, k) - dgamma[k][i](j, i);
        for (int q = 0; q < n; ++q) acc += gam[i](i, q) * gam[q](j, k) - gam[i](k, q) * gam[q](j, i);
      }
      ric(j, k) = acc;
    }
  return metric_at<Eigen::Dynamic>(geom, x).inverse() * ric;
}

/// Laplace-Beltrami Δu = g^{ij}(∂_ij u - Γ^k_ij ∂_k u), every ingredient by differences.
inline double laplacian(const GeometryModel& geom, const ScalarField& u, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd hess = hessian(u, x);
  const Eigen::VectorXd grad = gradient(u, x);
  const auto gam = christoffel(geom, x);
  const Eigen::MatrixXd ginv = metric_at<Eigen::Dynamic>(geom, x).inverse();
  double acc = 0.0;
  for (int i = 0; i < geom.dim(); ++i)
    for (int j = 0; j < geom.dim(); ++j) {
      double conn = 0.0;
      for (int k = 0; k < geom.dim(); ++k) conn += gam[k](i, j) * grad(k);
      acc += ginv(i, j) * (hess(i, j) - conn);
    }
  return acc;
}

/// Φ = ½ J^{1/2} Δ J^{-1/2}, Laplacian by differences.
inline double phi(const GeometryModel& geom, const Eigen::VectorXd& x) {
  const ScalarField inv_sqrt_j = [&geom](const Eigen::VectorXd& y) {
    return std::exp(-0.5 * jacobian_data<Eigen::Dynamic>(geom, y).log_J);
  };
  return 0.5 * laplacian(geom, inv_sqrt_j, x) / inv_sqrt_j(x);
}

}  // namespace fd

/// Model-space closed form: Φ = -(n-1)^2 c^2/8 + (n-1)(n-3)/8 (1/r^2 - c^2/sinh^2(cr)).
inline double hyperbolic_phi_closed_form(int n, double c, double r) {
  const double m = n - 1;
  const double x = c * r;
  // 1/r^2 - c^2/sinh^2(cr) = c^2 (1/x^2 - csch^2 x), series below x = 1e-2
  const double bracket =
      x < 1e-2 ? c * c * (1.0 / 3.0 - x * x / 15.0) : c * c * (1.0 / (x * x) - 1.0 / (std::sinh(x) * std::sinh(x)));
  return -m * m * c * c / 8.0 + m * (n - 3) / 8.0 * bracket;
}

// ---------------------------------------------------------------------------

struct IdentityRecord {
  std::string check;
  double tau = 0.0;
  double r = 0.0;
  double value = 0.0;
  double reference = 0.0;
  double rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct AuditSummary {
  std::string name;
  double min_value = std::numeric_limits<double>::infinity();
  double max_value = -std::numeric_limits<double>::infinity();
  double r_at_min = 0.0;
  double r_at_max = 0.0;

  void update(double v, double r) {
    if (v < min_value) {
      min_value = v;
      r_at_min = r;
    }
    if (v > max_value) {
      max_value = v;
      r_at_max = r;
    }
  }
};

struct IdentityReport {
  std::string geometry;
  std::vector<IdentityRecord> records;
  std::vector<AuditSummary> audits;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.pass; }));
  }
  bool passed() const { return failures() == 0; }

  double worst(const std::string& check) const {
    double w = 0.0;
    for (const auto& rec : records)
      if (rec.check == check) w = std::max(w, rec.rel_err);
    return w;
  }
};

struct IdentityTolerances {
  double closed_form = 1e-8;
  double finite_difference = 1e-5;
  double trace = 1e-10;
};

/// Points with r uniform in [r_min, r_max] and uniformly random directions.
inline std::vector<Eigen::VectorXd> random_chart_points(int dim, std::size_t count, double r_min, double r_max,
                                                        std::uint64_t seed) {
  auto rng = path_stream(seed, 0, StreamTag::sampling);
  StandardNormal normal;
  std::uniform_real_distribution<double> radius(r_min, r_max);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd dir(dim);
    do {
      for (int k = 0; k < dim; ++k) dir(k) = normal(rng);
    } while (dir.norm() < 1e-6);
    out.push_back(radius(rng) * dir.normalized());
  }
  return out;
}

/// Checks (i)-(viii): Laplacian and time derivative of log k against
/// differences, the |∇log k|^2 expansion, the scalar PDE identity in closed
/// form and by differences, Φ against ½J^{1/2}ΔJ^{-1/2} (and the model-space
/// closed form), the Δr trace identity and the Frobenius bound of Hess r.
/// Curvature, Φ and the growth condition are audited on a radius grid.
inline IdentityReport identity_suite(const GeometryModel& geom, const std::vector<Eigen::VectorXd>& points,
                                     const std::vector<double>& taus, const IdentityTolerances& tol = {}) {
  using V = Eigen::VectorXd;
  const int n = geom.dim();
  IdentityReport report;
  report.geometry = geom.describe();

  auto add = [&report](std::string check, double tau, double r, double value, double reference, double tolerance) {
    IdentityRecord rec{std::move(check), tau, r, value, reference, relative_error(value, reference), tolerance, true};
    rec.pass = std::isfinite(rec.rel_err) && rec.rel_err <= tolerance;
    report.records.push_back(std::move(rec));
  };

  for (const V& x : points) {
    if (x.size() != n) throw InputError("sample point dimension does not match geometry");
    const double r = x.norm();
    if (r < 1e-3) throw InputError("identity sample points must stay away from the pole");
    const Eigen::MatrixXd g = metric_at<Eigen::Dynamic>(geom, x);
    const Eigen::MatrixXd ginv = inverse_metric_at<Eigen::Dynamic>(geom, x);
    const double phi = phi_data<Eigen::Dynamic>(geom, x).phi;
    const auto jac = jacobian_data<Eigen::Dynamic>(geom, x);

    for (double tau : taus) {
      const auto lk = log_k_data<Eigen::Dynamic>(geom, tau, x);
      const fd::ScalarField log_k = [&geom, tau](const V& y) { return log_k_data<Eigen::Dynamic>(geom, tau, y).log_k; };

      // (i) Δ log k
      const double lap_fd = fd::laplacian(geom, log_k, x);
      add("lap_log_k_fd", tau, r, lap_fd, lk.lap_log_k, tol.finite_difference);
      add("lap_log_k_trace", tau, r, (ginv * lk.hess_log_k).trace(), lk.lap_log_k, tol.closed_form);

      // (ii) ∂_s log k_{1-s} = -∂_τ log k_τ
      const double h = kFdStepFirst;
      const double dtime_fd =
          -fd::derivative([&](double s) { return log_k_data<Eigen::Dynamic>(geom, tau + s, x).log_k; }, h);
      add("dtime_log_k_fd", tau, r, dtime_fd, lk.dtime_log_k, tol.finite_difference);

      // (iii) |∇log k|^2 = r^2/τ^2 + r⟨∇r, ∇log J⟩/τ + ¼|∇log J|^2
      const double grad2 = lk.grad_log_k.dot(g * lk.grad_log_k);
      const double dphi = jac.grad_log_J.dot(x) / r;  // signed φ'
      const double expansion = r * r / (tau * tau) + r * dphi / tau + 0.25 * dphi * dphi;
      add("grad_log_k_sq", tau, r, grad2, expansion, tol.closed_form);

      // (iv) ½Δ log k + ∂_s log k + ½|∇log k|^2 = Φ
      add("pde_closed_form", tau, r, 0.5 * lk.lap_log_k + lk.dtime_log_k + 0.5 * grad2, phi, tol.closed_form);
      const V grad_fd = fd::gradient(log_k, x);
      const double pde_fd = 0.5 * lap_fd + dtime_fd + 0.5 * grad_fd.dot(ginv * grad_fd);
      add("pde_fd", tau, r, pde_fd, phi, tol.finite_difference);
    }

    // (v) Φ
    add("phi_fd", 0.0, r, fd::phi(geom, x), phi, tol.finite_difference);
    if (geom.kind() == GeometryKind::hyperbolic)
      add("phi_model_closed_form", 0.0, r, hyperbolic_phi_closed_form(n, geom.curvature_scale(), r), phi,
          tol.closed_form);
    if (geom.kind() == GeometryKind::euclidean) add("phi_flat", 0.0, r, phi, 0.0, tol.closed_form);

    // (vi) Δr = tr_g Hess r = (n-1)/r + ⟨∇r, ∇log J⟩
    const auto rad = radial_data<Eigen::Dynamic>(geom, x);
    const double trace = (ginv * rad.hess_r).trace();
    add("lap_r_trace", 0.0, r, trace, (n - 1) / r + rad.grad_r.dot(g * jac.grad_log_J), tol.trace);

    // (vii) ‖∇dr‖_F ≤ Δr / √(n-1); recorded as the ratio, which must not exceed 1
    if (n > 1) {
      const Eigen::MatrixXd mixed = ginv * rad.hess_r;
      const double frob = std::sqrt((mixed * mixed).trace());
      const double bound = laplacian_r(geom, r) / std::sqrt(n - 1.0);
      IdentityRecord rec{"hess_r_frobenius_bound", 0.0, r, frob, bound, 0.0, tol.trace, true};
      rec.rel_err = std::max(0.0, (frob - bound) / std::max(std::abs(bound), 1.0));
      rec.pass = rec.rel_err <= tol.trace;
      report.records.push_back(rec);
    }
  }

  // (viii) audits on r ∈ [0, 10]
  AuditSummary ric{"ricci_eigenvalue"}, phi_low{"phi"}, growth{"growth_ratio"};
  const double a = geom.growth_constant();
  for (int i = 0; i <= 1000; ++i) {
    const double r = 0.01 * i;
    V x = V::Zero(n);
    x(0) = r;
    const auto ev = ricci_eigenvalues<Eigen::Dynamic>(geom, x);
    ric.update(ev.radial, r);
    if (n > 1) ric.update(ev.tangential, r);
    const auto terms = geom.radial_terms(std::max(r, kPoleRadius));
    const auto prof = phi_profile(n, terms, r);
    phi_low.update(prof[0], r);
    // (|∇Φ| + |∇log J|) / (e^{a r^2} + 1): the smallest admissible constant is its max
    const double lhs = std::abs(prof[1]) + std::abs((n - 1) * terms.a);
    growth.update(lhs / (std::exp(std::min(a * r * r, 700.0)) + 1.0), r);
  }
  report.audits = {ric, phi_low, growth};
  return report;
}

}  // namespace polebridge
