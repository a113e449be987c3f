#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "polebridge/geometry.hpp"
#include "polebridge/identities.hpp"

using namespace polebridge;
using V = Eigen::VectorXd;
using M = Eigen::MatrixXd;

namespace {

// Frozen reference values (50-digit mpmath evaluation, rounded).
constexpr double kSinh1Sq = 1.38109784554181573;
constexpr double kLogJ_H2_r1 = 0.161439361571195634;
constexpr double kLogJ_H3_r1 = 0.322878723142391267;
constexpr double kGradLogJ_H2_r1 = 0.313035285499331304;  // coth 1 - 1
constexpr double kLapLogJ_H2_r1 = 0.686964714500668696;
constexpr double kPhi_H2_r1 = -0.159492292379211192;
constexpr double kLogK_flat = -2.14472988584940017;  // n=2, τ=0.5, x=(1,0)
constexpr double kCoth1 = 1.31303528549933130;

V vec(std::initializer_list<double> v) {
  V out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<GeometryModel> all_geometries(int n) {
  return {GeometryModel::euclidean(n), GeometryModel::hyperbolic(n, 1.0), GeometryModel::hyperbolic(n, 0.5),
          GeometryModel::warped(n, "flat"), GeometryModel::warped(n, "cubic"), GeometryModel::warped(n, "tapered")};
}

}  // namespace

TEST(Metric, EuclideanIsIdentity) {
  const auto g = GeometryModel::euclidean(3);
  EXPECT_TRUE(metric_at<Eigen::Dynamic>(g, vec({0.3, -1.0, 2.0})).isApprox(M::Identity(3, 3)));
}

TEST(Metric, HyperbolicTangentialEntry) {
  const auto g = GeometryModel::hyperbolic(2, 1.0);
  const M m = metric_at<Eigen::Dynamic>(g, vec({1.0, 0.0}));
  EXPECT_NEAR(m(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(m(1, 1), kSinh1Sq, 1e-14);
  EXPECT_NEAR(m(0, 1), 0.0, 1e-15);
}

TEST(Metric, PoleLimitAndSpd) {
  auto rng = path_stream(11, 0, StreamTag::sampling);
  for (const auto& g : all_geometries(3)) {
    EXPECT_TRUE(metric_at<Eigen::Dynamic>(g, V::Zero(3)).isApprox(M::Identity(3, 3)));
    EXPECT_TRUE(metric_at<Eigen::Dynamic>(g, vec({1e-9, 0, 0})).isApprox(M::Identity(3, 3), 1e-12));
    for (const V& x : random_chart_points(3, 20, 0.0, 5.0, 3)) {
      const M m = metric_at<Eigen::Dynamic>(g, x);
      EXPECT_TRUE(m.isApprox(m.transpose()));
      Eigen::SelfAdjointEigenSolver<M> es(m);
      EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
      // radial direction has unit length
      EXPECT_NEAR(metric_inner<Eigen::Dynamic>(g, x, V(x.normalized()), V(x.normalized())), 1.0, 1e-12);
      EXPECT_TRUE((m * inverse_metric_at<Eigen::Dynamic>(g, x)).isApprox(M::Identity(3, 3), 1e-12));
    }
  }
  (void)rng;
}

TEST(Metric, RejectsNonFinite) {
  const auto g = GeometryModel::hyperbolic(2, 1.0);
  EXPECT_THROW(metric_at<Eigen::Dynamic>(g, vec({NAN, 0.0})), InputError);
  EXPECT_THROW(metric_at<Eigen::Dynamic>(g, vec({1.0, 0.0, 0.0})), InputError);
}

TEST(Geometry, ConstructionValidation) {
  EXPECT_THROW(GeometryModel::euclidean(0), InputError);
  EXPECT_THROW(GeometryModel::hyperbolic(2, 0.0), InputError);
  EXPECT_THROW(GeometryModel::hyperbolic(2, 1.0, -1.0), InputError);
  EXPECT_THROW(GeometryModel::warped(2, "user_code"), InputError);
  const auto g = GeometryModel::warped(2, "cubic");
  EXPECT_NEAR(g.f(1e-6), 1e-6, 1e-18);
  EXPECT_NEAR(g.df(0.0), 1.0, 1e-15);
}

TEST(Christoffel, MatchesFiniteDifferences) {
  for (int n : {2, 3}) {
    for (const auto& g : all_geometries(n)) {
      for (const V& x : random_chart_points(n, 15, 0.1, 5.0, 17)) {
        const auto closed = christoffel_at<Eigen::Dynamic>(g, x);
        const auto oracle = fd::christoffel(g, x);
        double scale = 0.0, err = 0.0;
        for (int k = 0; k < n; ++k) {
          EXPECT_TRUE(closed[k].isApprox(closed[k].transpose(), 1e-14));
          scale = std::max(scale, closed[k].cwiseAbs().maxCoeff());
          err = std::max(err, (closed[k] - oracle[k]).cwiseAbs().maxCoeff());
        }
        EXPECT_LT(err / std::max(scale, 1.0), 1e-6) << g.describe() << " r=" << x.norm();
      }
    }
  }
}

TEST(Christoffel, FlatIsZeroAndPoleLimit) {
  const auto flat = GeometryModel::warped(3, "flat");
  for (const auto& m : christoffel_at<Eigen::Dynamic>(flat, vec({0.4, 1.0, -2.0}))) EXPECT_LT(m.norm(), 1e-15);
  const auto hyp = GeometryModel::hyperbolic(3, 1.0);
  for (const auto& m : christoffel_at<Eigen::Dynamic>(hyp, V::Zero(3))) EXPECT_EQ(m.norm(), 0.0);
}

TEST(Christoffel, ContractionAgreesWithArray) {
  const auto g = GeometryModel::hyperbolic(3, 1.0);
  const V x = vec({0.7, -0.2, 1.1});
  const V v = vec({0.3, 0.5, -0.4});
  const V w = vec({-1.0, 0.2, 0.9});
  const auto gam = christoffel_at<Eigen::Dynamic>(g, x);
  V expect(3);
  for (int k = 0; k < 3; ++k) expect(k) = v.dot(gam[k] * w);
  EXPECT_TRUE(christoffel_contract<Eigen::Dynamic>(g, x, v, w).isApprox(expect, 1e-13));
}

TEST(Ricci, HyperbolicConstantCurvature) {
  for (int n : {2, 3}) {
    const auto g = GeometryModel::hyperbolic(n, 1.0);
    for (const V& x : random_chart_points(n, 10, 0.1, 4.0, 5)) {
      const M ric = ricci_sharp_at<Eigen::Dynamic>(g, x);
      EXPECT_TRUE(ric.isApprox(-(n - 1.0) * M::Identity(n, n), 1e-9)) << ric;
      EXPECT_LT(relative_error_max(fd::ricci_sharp(g, x), ric), 1e-4);
    }
  }
  EXPECT_LT(ricci_sharp_at<Eigen::Dynamic>(GeometryModel::euclidean(3), vec({1, 2, 3})).norm(), 1e-15);
}

TEST(Ricci, WarpedSelfAdjointAndFdOracle) {
  for (const auto& g : all_geometries(3)) {
    for (const V& x : random_chart_points(3, 10, 0.1, 4.0, 23)) {
      const M ric = ricci_sharp_at<Eigen::Dynamic>(g, x);
      const M lowered = metric_at<Eigen::Dynamic>(g, x) * ric;
      EXPECT_TRUE(lowered.isApprox(lowered.transpose(), 1e-12) || lowered.norm() < 1e-14);
      EXPECT_LT(relative_error_max(fd::ricci_sharp(g, x), ric), 1e-4) << g.describe();
    }
  }
}

TEST(RadialData, Euclidean345) {
  const auto g = GeometryModel::euclidean(2);
  const auto rd = radial_data<Eigen::Dynamic>(g, vec({3.0, 4.0}));
  EXPECT_DOUBLE_EQ(rd.r, 5.0);
  EXPECT_TRUE(rd.grad_r.isApprox(vec({0.6, 0.8})));
  EXPECT_NEAR((rd.hess_r * vec({-0.8, 0.6})).norm(), 0.2, 1e-14);
  EXPECT_LT((rd.hess_r * rd.grad_r).norm(), 1e-15);
}

TEST(RadialData, HyperbolicEigenvalueAndPoleError) {
  const auto g = GeometryModel::hyperbolic(2, 1.0);
  const V x = vec({1.0, 0.0});
  const auto rd = radial_data<Eigen::Dynamic>(g, x);
  // mixed tensor G^{-1} Hess r has tangential eigenvalue f'/f = coth 1
  const M mixed = inverse_metric_at<Eigen::Dynamic>(g, x) * rd.hess_r;
  EXPECT_NEAR(mixed(1, 1), kCoth1, 1e-13);
  EXPECT_NEAR(laplacian_r(g, 1.0), kCoth1, 1e-13);
  EXPECT_THROW(radial_data<Eigen::Dynamic>(g, V::Zero(2)), DegeneratePointError);
}

TEST(Jacobian, HyperbolicReferenceValues) {
  const auto h2 = GeometryModel::hyperbolic(2, 1.0);
  const auto jd = jacobian_data<Eigen::Dynamic>(h2, vec({1.0, 0.0}));
  EXPECT_NEAR(jd.log_J, kLogJ_H2_r1, 1e-13);
  EXPECT_NEAR(jd.grad_log_J.norm(), kGradLogJ_H2_r1, 1e-13);
  EXPECT_NEAR(jd.lap_log_J, kLapLogJ_H2_r1, 1e-12);
  EXPECT_NEAR(jacobian_data<Eigen::Dynamic>(GeometryModel::hyperbolic(3, 1.0), vec({0.0, 1.0, 0.0})).log_J,
              kLogJ_H3_r1, 1e-13);
  const auto flat = jacobian_data<Eigen::Dynamic>(GeometryModel::euclidean(3), vec({1.0, 2.0, 0.5}));
  EXPECT_EQ(flat.log_J, 0.0);
  EXPECT_EQ(flat.grad_log_J.norm(), 0.0);
  EXPECT_EQ(flat.lap_log_J, 0.0);
}

TEST(Jacobian, FiniteDifferenceCrossCheck) {
  for (const auto& g : all_geometries(3)) {
    for (const V& x : random_chart_points(3, 8, 0.2, 4.0, 31)) {
      const fd::ScalarField log_j = [&g](const V& y) { return jacobian_data<Eigen::Dynamic>(g, y).log_J; };
      const auto jd = jacobian_data<Eigen::Dynamic>(g, x);
      EXPECT_LT(relative_error_max(fd::gradient(log_j, x), jd.grad_log_J), 1e-7);
      EXPECT_LT(relative_error(fd::laplacian(g, log_j, x), jd.lap_log_J), 1e-5) << g.describe();
    }
  }
}

TEST(Phi, ReferenceValues) {
  EXPECT_NEAR(phi_data<Eigen::Dynamic>(GeometryModel::hyperbolic(2, 1.0), vec({1.0, 0.0})).phi, kPhi_H2_r1, 1e-12);
  const auto h3 = GeometryModel::hyperbolic(3, 1.0);
  for (double r : {1e-9, 1e-3, 0.04, 0.3, 1.0, 2.5, 6.0})
    EXPECT_NEAR(phi_data<Eigen::Dynamic>(h3, vec({r, 0.0, 0.0})).phi, -0.5, 1e-12) << r;
  EXPECT_EQ(phi_data<Eigen::Dynamic>(GeometryModel::euclidean(2), vec({1.0, 1.0})).phi, 0.0);
}

TEST(Phi, ClosedFormsAgree) {
  for (int n : {2, 3, 4}) {
    for (double c : {0.5, 1.0, 2.0}) {
      const auto g = GeometryModel::hyperbolic(n, c);
      for (double r : {0.01, 0.05, 0.3, 1.0, 3.0}) {
        V x = V::Zero(n);
        x(0) = r;
        const double phi = phi_data<Eigen::Dynamic>(g, x).phi;
        EXPECT_NEAR(phi, hyperbolic_phi_closed_form(n, c, r), 1e-10 * std::max(1.0, std::abs(phi)));
        if (r >= 0.05) {
          EXPECT_LT(relative_error(fd::phi(g, x), phi), 1e-5);
        }
      }
    }
  }
}

TEST(Phi, GradientIsRadialDerivative) {
  for (const auto& g : all_geometries(3)) {
    const V x = vec({0.6, -0.9, 0.4});
    const fd::ScalarField phi = [&g](const V& y) { return phi_data<Eigen::Dynamic>(g, y).phi; };
    EXPECT_LT(relative_error_max(fd::gradient(phi, x), phi_data<Eigen::Dynamic>(g, x).grad_phi), 1e-7)
        << g.describe();
  }
}

TEST(LogKernel, FlatReferenceValues) {
  const auto g = GeometryModel::euclidean(2);
  const auto lk = log_k_data<Eigen::Dynamic>(g, 0.5, vec({1.0, 0.0}));
  EXPECT_NEAR(lk.log_k, kLogK_flat, 1e-14);
  EXPECT_TRUE(lk.grad_log_k.isApprox(vec({-2.0, 0.0})));
  EXPECT_NEAR(lk.dtime_log_k, 0.0, 1e-15);
  EXPECT_EQ(log_k_data<Eigen::Dynamic>(g, 0.3, V::Zero(2)).grad_log_k.norm(), 0.0);
  EXPECT_THROW(log_k_data<Eigen::Dynamic>(g, 0.0, vec({1.0, 0.0})), InputError);
}

TEST(LogKernel, HyperbolicGradient) {
  const auto g = GeometryModel::hyperbolic(2, 1.0);
  const V x = vec({1.0, 0.0});
  const auto lk = log_k_data<Eigen::Dynamic>(g, 1.0, x);
  EXPECT_NEAR(lk.grad_log_k(0), -1.0 - 0.5 * kGradLogJ_H2_r1, 1e-13);
  EXPECT_NEAR(lk.grad_log_k(1), 0.0, 1e-15);
  EXPECT_TRUE(grad_log_k<Eigen::Dynamic>(g, 1.0, x).isApprox(lk.grad_log_k, 1e-14));
}

TEST(LogKernel, HessianMatchesFiniteDifferences) {
  for (const auto& g : all_geometries(3)) {
    for (double tau : {0.1, 0.7}) {
      const V x = vec({0.8, 0.3, -1.2});
      const fd::ScalarField log_k = [&g, tau](const V& y) { return log_k_data<Eigen::Dynamic>(g, tau, y).log_k; };
      // covariant Hessian = ∂²u - Γ^k ∂_k u
      const M hess = fd::hessian(log_k, x);
      const V grad = fd::gradient(log_k, x);
      const auto gam = christoffel_at<Eigen::Dynamic>(g, x);
      M cov = hess;
      for (int k = 0; k < 3; ++k) cov -= gam[k] * grad(k);
      const auto lk = log_k_data<Eigen::Dynamic>(g, tau, x);
      EXPECT_LT(relative_error_max(cov, lk.hess_log_k), 1e-5) << g.describe();
      // gradient: chart partials raised by G^{-1}
      EXPECT_LT(relative_error_max(V(inverse_metric_at<Eigen::Dynamic>(g, x) * grad), lk.grad_log_k), 1e-7);
    }
  }
}

TEST(IdentitySuite, AllGeometriesPass) {
  for (int n : {1, 2, 3}) {
    std::vector<GeometryModel> geoms{GeometryModel::euclidean(n)};
    if (n > 1) {
      for (const auto& g : all_geometries(n)) geoms.push_back(g);
    }
    for (const auto& g : geoms) {
      const auto rep = identity_suite(g, random_chart_points(n, 6, 0.1, 4.0, 99), {0.1, 0.5, 1.0});
      for (const auto& rec : rep.records)
        EXPECT_TRUE(rec.pass) << g.describe() << " " << rec.check << " r=" << rec.r << " tau=" << rec.tau
                              << " err=" << rec.rel_err;
    }
  }
}

TEST(IdentitySuite, AuditsReported) {
  const auto rep = identity_suite(GeometryModel::hyperbolic(3, 1.0, 0.5), {}, {});
  ASSERT_EQ(rep.audits.size(), 3u);
  EXPECT_NEAR(rep.audits[0].min_value, -2.0, 1e-6);
  EXPECT_NEAR(rep.audits[1].min_value, -0.5, 1e-9);
  EXPECT_GT(rep.audits[2].max_value, 0.0);
}
