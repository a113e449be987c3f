#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polebridge/bridge_sde.hpp"
#include "polebridge/geometry.hpp"

namespace polebridge {

// ---------------------------------------------------------------------------
// Cameron-Martin directions

/// h(s) = Σ_c scale_c φ_c(s) e_{axis_c}, with φ = √2 sin(kπs)/(kπ) (pinned,
/// unit H¹ norm) or φ = s (based: h(1) ≠ 0).
class CMDirection {
 public:
  enum class Shape { sine, ramp };

  struct Component {
    Shape shape = Shape::sine;
    int k = 1;
    int axis = 0;  // 0-based
    double scale = 1.0;
  };

  static CMDirection zero(int dim) { return CMDirection(dim, {}, "zero"); }

  /// Axis is 1-based, as in the registry key sine(k,axis).
  static CMDirection sine(int k, int axis, int dim) {
    if (k < 1) throw InputError("sine direction needs k >= 1");
    check_axis(axis, dim);
    return CMDirection(dim, {{Shape::sine, k, axis - 1, 1.0}},
                       "sine(" + std::to_string(k) + "," + std::to_string(axis) + ")");
  }

  static CMDirection ramp(int axis, int dim) {
    check_axis(axis, dim);
    return CMDirection(dim, {{Shape::ramp, 1, axis - 1, 1.0}}, "ramp(" + std::to_string(axis) + ")");
  }

  CMDirection scaled(double c) const {
    auto comps = components_;
    for (auto& comp : comps) comp.scale *= c;
    return CMDirection(dim_, std::move(comps), label_ + "*" + std::to_string(c));
  }

  CMDirection operator+(const CMDirection& other) const {
    if (other.dim_ != dim_) throw InputError("direction dimensions differ");
    auto comps = components_;
    comps.insert(comps.end(), other.components_.begin(), other.components_.end());
    return CMDirection(dim_, std::move(comps), label_ + "+" + other.label_);
  }

  int dim() const noexcept { return dim_; }
  const std::string& label() const noexcept { return label_; }
  const std::vector<Component>& components() const noexcept { return components_; }

  template <int N>
  Vec<N> value(double s) const {
    Vec<N> h = Vec<N>::Zero(dim_);
    for (const auto& c : components_) h(c.axis) += c.scale * profile(c, s);
    return h;
  }

  template <int N>
  Vec<N> derivative(double s) const {
    Vec<N> h = Vec<N>::Zero(dim_);
    for (const auto& c : components_) h(c.axis) += c.scale * dprofile(c, s);
    return h;
  }

  /// |h|_{H¹} by composite Simpson quadrature of |ḣ|^2.
  double h_norm() const {
    constexpr int panels = 4096;
    const double step = 1.0 / panels;
    double acc = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * derivative<Eigen::Dynamic>(i * step).squaredNorm();
    }
    return std::sqrt(acc * step / 3.0);
  }

  /// Membership in H⁰ (h(1) = 0).
  bool pinned() const { return value<Eigen::Dynamic>(1.0).norm() < 1e-12; }

 private:
  CMDirection(int dim, std::vector<Component> comps, std::string label)
      : dim_(dim), components_(std::move(comps)), label_(std::move(label)) {
    if (dim < 1) throw InputError("dimension must be >= 1");
  }

  static void check_axis(int axis, int dim) {
    if (axis < 1 || axis > dim)
      throw InputError("axis " + std::to_string(axis) + " out of range 1.." + std::to_string(dim));
  }

  static double profile(const Component& c, double s) {
    if (c.shape == Shape::ramp) return s;
    const double w = c.k * std::numbers::pi;
    return std::numbers::sqrt2 * std::sin(w * s) / w;
  }

  static double dprofile(const Component& c, double s) {
    if (c.shape == Shape::ramp) return 1.0;
    return std::numbers::sqrt2 * std::cos(c.k * std::numbers::pi * s);
  }

  int dim_;
  std::vector<Component> components_;
  std::string label_;
};

inline CMDirection cm_basis(int k, int axis, int dim) { return CMDirection::sine(k, axis, dim); }

// ---------------------------------------------------------------------------
// Cylindrical functionals F(σ) = f(σ_{t_1}, ..., σ_{t_m})

class CylinderFunctional {
 public:
  using Points = std::vector<Eigen::VectorXd>;
  using ValueFn = std::function<double(const Points&)>;
  using PartialsFn = std::function<Points(const Points&)>;  // chart covectors ∂_k f

  static constexpr double kFallbackStep = 1e-5;

  CylinderFunctional(std::vector<double> times, ValueFn f, PartialsFn partials, std::string label)
      : times_(std::move(times)), f_(std::move(f)), partials_(std::move(partials)), label_(std::move(label)) {
    for (std::size_t k = 0; k < times_.size(); ++k) {
      if (!(times_[k] > 0.0) || !(times_[k] < 1.0))
        throw InputError("functional times must lie in (0, 1)");
      if (k > 0 && !(times_[k] > times_[k - 1])) throw InputError("functional times must be increasing");
    }
  }

  static CylinderFunctional constant(double c) {
    return CylinderFunctional({}, [c](const Points&) { return c; }, [](const Points&) { return Points{}; },
                              c == 1.0 ? "one" : "const(" + std::to_string(c) + ")");
  }

  /// (x^axis_t)^power, axis 1-based.
  static CylinderFunctional coord(int power, int axis, double t) {
    if (power < 1) throw InputError("coord power must be >= 1");
    if (axis < 1) throw InputError("coord axis must be >= 1");
    const int i = axis - 1;
    return CylinderFunctional(
        {t},
        [=](const Points& x) { return std::pow(component(x[0], i), power); },
        [=](const Points& x) {
          Eigen::VectorXd d = Eigen::VectorXd::Zero(x[0].size());
          d(i) = power * std::pow(component(x[0], i), power - 1);
          return Points{d};
        },
        "coord(" + std::to_string(power) + "," + std::to_string(axis) + "," + trim_double(t) + ")");
  }

  /// r(x_t)^2 = |x_t|^2 in normal coordinates.
  static CylinderFunctional dist2(double t) {
    return CylinderFunctional(
        {t}, [](const Points& x) { return x[0].squaredNorm(); },
        [](const Points& x) { return Points{Eigen::VectorXd(2.0 * x[0])}; }, "dist2(" + trim_double(t) + ")");
  }

  /// exp(-r(x_t)^2 / w^2).
  static CylinderFunctional bump(double t, double width = 1.0) {
    if (!(width > 0.0)) throw InputError("bump width must be > 0");
    const double w2 = width * width;
    return CylinderFunctional(
        {t}, [w2](const Points& x) { return std::exp(-x[0].squaredNorm() / w2); },
        [w2](const Points& x) {
          const double v = std::exp(-x[0].squaredNorm() / w2);
          return Points{Eigen::VectorXd(-2.0 / w2 * v * x[0])};
        },
        "bump(" + trim_double(t) + (width == 1.0 ? "" : "," + trim_double(width)) + ")");
  }

  static CylinderFunctional product(const CylinderFunctional& a, const CylinderFunctional& b) {
    std::vector<double> times = a.times_;
    for (double t : b.times_)
      if (std::none_of(times.begin(), times.end(), [t](double s) { return std::abs(s - t) < 1e-12; }))
        times.push_back(t);
    std::sort(times.begin(), times.end());
    auto slot_map = [&times](const std::vector<double>& own) {
      std::vector<std::size_t> map;
      for (double t : own)
        map.push_back(static_cast<std::size_t>(
            std::find_if(times.begin(), times.end(), [t](double s) { return std::abs(s - t) < 1e-12; }) -
            times.begin()));
      return map;
    };
    auto ma = slot_map(a.times_);
    auto mb = slot_map(b.times_);
    auto pick = [](const Points& x, const std::vector<std::size_t>& map) {
      Points out;
      out.reserve(map.size());
      for (auto s : map) out.push_back(x[s]);
      return out;
    };
    ValueFn f = [a, b, ma, mb, pick](const Points& x) { return a.value(pick(x, ma)) * b.value(pick(x, mb)); };
    PartialsFn d;
    if (a.has_closed_form() && b.has_closed_form()) {
      const std::size_t m = times.size();
      d = [a, b, ma, mb, pick, m](const Points& x) {
        const Points xa = pick(x, ma);
        const Points xb = pick(x, mb);
        const double va = a.value(xa);
        const double vb = b.value(xb);
        const Points da = a.partials(xa);
        const Points db = b.partials(xb);
        Points out(m, Eigen::VectorXd::Zero(x.empty() ? 0 : x[0].size()));
        for (std::size_t s = 0; s < ma.size(); ++s) out[ma[s]] += vb * da[s];
        for (std::size_t s = 0; s < mb.size(); ++s) out[mb[s]] += va * db[s];
        return out;
      };
    }
    return CylinderFunctional(std::move(times), std::move(f), std::move(d),
                              "prod(" + a.label_ + "," + b.label_ + ")");
  }

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t slots() const noexcept { return times_.size(); }
  const std::string& label() const noexcept { return label_; }
  bool has_closed_form() const noexcept { return static_cast<bool>(partials_); }

  /// Same functional with the closed-form gradient removed (forces the fallback).
  CylinderFunctional without_closed_form() const {
    return CylinderFunctional(times_, f_, {}, label_ + "[fd]");
  }

  double value(const Points& x) const {
    check_arity(x);
    return f_(x);
  }

  /// Chart partial derivatives per slot: closed form, else central differences.
  Points partials(const Points& x) const {
    check_arity(x);
    if (partials_) return partials_(x);
    return partials_fd(x);
  }

  Points partials_fd(const Points& x) const {
    check_arity(x);
    Points out;
    out.reserve(x.size());
    Points probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
      Eigen::VectorXd d(x[k].size());
      for (Eigen::Index i = 0; i < x[k].size(); ++i) {
        probe[k](i) = x[k](i) + kFallbackStep;
        const double up = f_(probe);
        probe[k](i) = x[k](i) - kFallbackStep;
        const double down = f_(probe);
        probe[k](i) = x[k](i);
        d(i) = (up - down) / (2.0 * kFallbackStep);
      }
      out.push_back(std::move(d));
    }
    return out;
  }

  /// Riemannian gradients ∇_k f = G^{-1} ∂_k f at each slot point.
  template <int N>
  std::vector<Vec<N>> gradients(const GeometryModel& geom, const Points& x) const {
    const Points d = partials(x);
    std::vector<Vec<N>> out;
    out.reserve(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      const Vec<N> xk = x[k];
      out.push_back(inverse_metric_at<N>(geom, xk) * Vec<N>(d[k]));
    }
    return out;
  }

 private:
  static double component(const Eigen::VectorXd& x, int i) {
    if (i >= x.size()) throw InputError("coord axis exceeds dimension");
    return x(i);
  }

  static std::string trim_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  void check_arity(const Points& x) const {
    if (x.size() != times_.size()) throw InputError("functional " + label_ + " expects " +
                                                    std::to_string(times_.size()) + " points");
  }

  std::vector<double> times_;
  ValueFn f_;
  PartialsFn partials_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Registry: text keys usable from configuration files

inline const std::vector<std::string>& functional_registry_keys() {
  static const std::vector<std::string> keys{"one",        "const(c)",  "coord(power,axis,t)",
                                             "dist2(t)",   "bump(t)",   "bump(t,width)",
                                             "prod(F,G)"};
  return keys;
}

inline const std::vector<std::string>& direction_registry_keys() {
  static const std::vector<std::string> keys{"sine(k,axis)", "ramp(axis)", "zero"};
  return keys;
}

namespace detail {

struct RegistryCall {
  std::string name;
  std::vector<std::string> args;
};

inline std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// name(arg, arg, ...) with nested parentheses in arguments.
inline RegistryCall split_call(std::string_view text) {
  const std::string s = strip(text);
  RegistryCall call;
  const auto open = s.find('(');
  if (open == std::string::npos) {
    call.name = s;
    return call;
  }
  if (s.back() != ')') throw InputError("malformed registry key '" + s + "'");
  call.name = strip(std::string_view(s).substr(0, open));
  const std::string_view inner = std::string_view(s).substr(open + 1, s.size() - open - 2);
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] == '(') ++depth;
    if (inner[i] == ')') --depth;
    if (depth < 0) throw InputError("unbalanced parentheses in '" + s + "'");
    if (inner[i] == ',' && depth == 0) {
      call.args.push_back(strip(inner.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw InputError("unbalanced parentheses in '" + s + "'");
  if (!strip(inner).empty()) call.args.push_back(strip(inner.substr(start)));
  return call;
}

inline double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw InputError("expected a number, got '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s) {
  const double v = parse_number(s);
  if (v != std::floor(v)) throw InputError("expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

inline std::string registry_listing(const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) out += (out.empty() ? "" : ", ") + k;
  return out;
}

}  // namespace detail

/// Parses a functional key such as "prod(coord(1,1,0.5),bump(0.25))".
inline CylinderFunctional parse_functional(std::string_view text, int dim) {
  const auto call = detail::split_call(text);
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (call.args.size() < lo || call.args.size() > hi)
      throw InputError("wrong number of arguments in functional '" + std::string(text) + "'");
  };
  if (call.name == "one" && call.args.empty()) return CylinderFunctional::constant(1.0);
  if (call.name == "const") {
    arity(1, 1);
    return CylinderFunctional::constant(detail::parse_number(call.args[0]));
  }
  if (call.name == "coord") {
    arity(3, 3);
    const int axis = detail::parse_int(call.args[1]);
    if (axis < 1 || axis > dim)
      throw InputError("coord axis " + std::to_string(axis) + " out of range 1.." + std::to_string(dim));
    return CylinderFunctional::coord(detail::parse_int(call.args[0]), axis, detail::parse_number(call.args[2]));
  }
  if (call.name == "dist2") {
    arity(1, 1);
    return CylinderFunctional::dist2(detail::parse_number(call.args[0]));
  }
  if (call.name == "bump") {
    arity(1, 2);
    const double w = call.args.size() == 2 ? detail::parse_number(call.args[1]) : 1.0;
    return CylinderFunctional::bump(detail::parse_number(call.args[0]), w);
  }
  if (call.name == "prod") {
    arity(2, 2);
    return CylinderFunctional::product(parse_functional(call.args[0], dim), parse_functional(call.args[1], dim));
  }
  throw InputError("unknown functional '" + std::string(text) +
                   "'; available: " + detail::registry_listing(functional_registry_keys()));
}

inline CMDirection parse_direction(std::string_view text, int dim) {
  const auto call = detail::split_call(text);
  if (call.name == "zero" && call.args.empty()) return CMDirection::zero(dim);
  if (call.name == "sine" && call.args.size() == 2)
    return CMDirection::sine(detail::parse_int(call.args[0]), detail::parse_int(call.args[1]), dim);
  if (call.name == "ramp" && call.args.size() == 1) return CMDirection::ramp(detail::parse_int(call.args[0]), dim);
  throw InputError("unknown direction '" + std::string(text) +
                   "'; available: " + detail::registry_listing(direction_registry_keys()));
}

// ---------------------------------------------------------------------------
// Path-space operations

namespace detail {

template <int N>
CylinderFunctional::Points slot_points(const CylinderFunctional& F, const FramePathSample<N>& path) {
  CylinderFunctional::Points x;
  x.reserve(F.slots());
  for (double t : F.times()) x.emplace_back(path.point_at_time(t));
  return x;
}

// Ric(w, .) as a chart covector: λ_r (n·w) n + ψ λ_t Q w.
template <int N>
Vec<N> ricci_lowered(const GeometryModel& geom, const ChartPoint<N>& x, const Vec<N>& w) {
  const auto ev = ricci_eigenvalues<N>(geom, x);
  const double r = x.norm();
  if (r < kPoleRadius) return ev.radial * w;
  const Vec<N> unit = x / r;
  const double rho = 1.0 + geom.radial_terms(r).ratio_m1;
  const double wn = unit.dot(w);
  return ev.radial * wn * unit + rho * rho * ev.tangential * (w - wn * unit);
}

// ½ ric_u h = ½ u^T G Ric♯ (u h)
template <int N>
Vec<N> half_ric(const GeometryModel& geom, const FrameState<N>& s, const Vec<N>& h) {
  return 0.5 * s.frame.transpose() * ricci_lowered<N>(geom, s.point, Vec<N>(s.frame * h));
}

template <int N>
void require_bridge(const FramePathSample<N>& path) {
  if (path.kind != PathKind::bridge) throw InputError("divergence weights need a bridge path");
  if (path.dB_tilde.size() != path.grid.steps() || path.dB.size() != path.grid.steps())
    throw InputError("path is missing its driving increments");
}

}  // namespace detail

/// dF(u h) = Σ_k ⟨∇_k f, u_{t_k} h(t_k)⟩_g = Σ_k ∂_k f(u_{t_k} h(t_k)).
template <int N>
double differential_along(const CylinderFunctional& F, const FramePathSample<N>& path, const CMDirection& h) {
  if (F.slots() == 0) return 0.0;
  const auto x = detail::slot_points<N>(F, path);
  const auto d = F.partials(x);
  double acc = 0.0;
  for (std::size_t k = 0; k < F.slots(); ++k) {
    const auto& s = path.state_at_time(F.times()[k]);
    acc += Vec<N>(d[k]).dot(s.frame * h.template value<N>(F.times()[k]));
  }
  return acc;
}

struct DivergenceBreakdown {
  double martingale_term = 0.0;
  double phi_term = 0.0;
  double hessian_term = 0.0;
  double boundary_term = 0.0;
  double total = 0.0;
};

/// Divergence weight ∫⟨ḣ + ½ ric h, dB̃⟩ + ∫ dΦ(ũ h) ds with left-endpoint sums.
template <int N>
DivergenceBreakdown divergence_direct(const GeometryModel& geom, const FramePathSample<N>& path,
                                      const CMDirection& h) {
  detail::require_bridge(path);
  DivergenceBreakdown out;
  const int n = geom.dim();
  for (std::size_t k = 0; k < path.grid.steps(); ++k) {
    const double t = path.grid[k];
    const auto& s = path.states[k];
    const Vec<N> hk = h.template value<N>(t);
    const Vec<N> integrand = h.template derivative<N>(t) + detail::half_ric<N>(geom, s, hk);
    out.martingale_term += integrand.dot(path.dB_tilde[k]);
    const double r = s.point.norm();
    if (r >= kPoleRadius) {
      const double dphi = phi_profile(n, geom.radial_terms(r), r)[1];
      out.phi_term += dphi * (s.point / r).dot(s.frame * hk) * path.grid.dt(k);
    }
  }
  out.total = out.martingale_term + out.phi_term;
  return out;
}

/// The same weight rewritten as an Itô integral, driven by the raw increments:
///   ∫⟨ḣ + ½ ric h, dB⟩ - ∫ ∇d log k_{1-s}(ũ dB, ũ h) + ⟨∇log k_{1-t_K}, ũ_{t_K} h_{t_K}⟩.
/// The two dΦ integrals of the identity cancel, so phi_term is zero.
template <int N>
DivergenceBreakdown divergence_lemma1(const GeometryModel& geom, const FramePathSample<N>& path,
                                      const CMDirection& h) {
  detail::require_bridge(path);
  DivergenceBreakdown out;
  const std::size_t K = path.grid.steps();
  for (std::size_t k = 0; k < K; ++k) {
    const double t = path.grid[k];
    const auto& s = path.states[k];
    const Vec<N> hk = h.template value<N>(t);
    const Vec<N> integrand = h.template derivative<N>(t) + detail::half_ric<N>(geom, s, hk);
    out.martingale_term += integrand.dot(path.dB[k]);
    const auto lk = log_k_data<N>(geom, 1.0 - t, s.point);
    out.hessian_term -= (s.frame * path.dB[k]).dot(lk.hess_log_k * (s.frame * hk));
  }
  const auto& last = path.states[K];
  const double t_end = path.grid[K];
  out.boundary_term =
      grad_log_k<N>(geom, 1.0 - t_end, last.point).dot(last.frame * h.template value<N>(t_end));
  out.total = out.martingale_term + out.hessian_term + out.boundary_term;
  return out;
}

/// ⟨∇ log k_{1-t}(x_t), u_t h(t)⟩ at the grid node nearest to t.
template <int N>
double endpoint_pairing(const GeometryModel& geom, const FramePathSample<N>& path, const CMDirection& h,
                        double t) {
  const std::size_t k = path.grid.nearest_node(t);
  const auto& s = path.states[k];
  const double tk = path.grid[k];
  // The gradient is radial, so its g-pairing equals the Euclidean chart pairing.
  return grad_log_k<N>(geom, 1.0 - tk, s.point).dot(s.frame * h.template value<N>(tk));
}

enum class GreenKind { based, pinned };

inline GreenKind parse_green_kind(std::string_view s) {
  if (s == "based") return GreenKind::based;
  if (s == "pinned") return GreenKind::pinned;
  throw InputError("green kind must be 'based' or 'pinned'");
}

inline double green_function(GreenKind which, double s, double t) {
  const double m = std::min(s, t);
  return which == GreenKind::based ? m : m - s * t;
}

/// Σ_{k,j} G(t_k, t_j) ⟨u_{t_j} u_{t_k}^{-1} ∇_k f, ∇_j f⟩_g. In frame
/// coordinates u^{-1}∇_k f = u^T ∂_k f, so the sum is a Gram form.
template <int N>
double green_gradient_norm(const CylinderFunctional& F, const FramePathSample<N>& path, GreenKind which) {
  if (F.slots() == 0) return 0.0;
  const auto x = detail::slot_points<N>(F, path);
  const auto d = F.partials(x);
  std::vector<Vec<N>> w;
  for (std::size_t k = 0; k < F.slots(); ++k)
    w.push_back(path.state_at_time(F.times()[k]).frame.transpose() * Vec<N>(d[k]));
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t j = 0; j < w.size(); ++j)
      acc += green_function(which, F.times()[k], F.times()[j]) * w[k].dot(w[j]);
  return acc;
}

}  // namespace polebridge
