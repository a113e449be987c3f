#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "polebridge/parallel.hpp"
#include "polebridge/stats.hpp"
#include "polebridge/verify.hpp"

using namespace polebridge;

// ---------------------------------------------------------------------------
// stats

TEST(Stats, PairwiseSumMatchesExactForIntegers) {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(Stats, SampleStatsKnownValues) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto s = sample_stats(v);
  EXPECT_EQ(s.n, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.se, std::sqrt(5.0 / 12.0));
}

TEST(Stats, ZValueEdgeCases) {
  EXPECT_EQ(z_value(0.0, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(z_value(1.0, 0.0)));
  EXPECT_LT(z_value(-1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(z_value(1.0, 0.5), 2.0);
}

TEST(Stats, PairedErrorIsSmallerForCorrelatedSamples) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> a, b;
  for (int i = 0; i < 2000; ++i) {
    const double common = normal(rng);
    a.push_back(common + 0.01 * normal(rng));
    b.push_back(common + 0.01 * normal(rng));
  }
  McReport paired, unpaired;
  fill_estimates(paired, a, b, true);
  fill_estimates(unpaired, a, b, false);
  EXPECT_TRUE(paired.paired);
  EXPECT_FALSE(unpaired.paired);
  EXPECT_LT(paired.se_diff, 0.1 * unpaired.se_diff);
  EXPECT_DOUBLE_EQ(unpaired.se_diff, unpaired.combined_se());
  EXPECT_DOUBLE_EQ(paired.z_score, (paired.estimate_lhs - paired.estimate_rhs) / paired.se_diff);
}

// ---------------------------------------------------------------------------
// parallel

TEST(Parallel, EveryIndexVisitedOnce) {
  for (int jobs : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(1001);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Parallel, ExceptionPropagates) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, FailureBudget) {
  // 1 failure in 1000 is within the 0.1% budget, 2 is not
  auto fail_first = [](std::size_t k) {
    return [k](std::size_t i) -> double {
      if (i < k) throw SimulationError(i, "synthetic");
      return 1.0;
    };
  };
  const auto ok = run_paths<double>(1000, 2, fail_first(1));
  EXPECT_EQ(ok.failed, 1u);
  EXPECT_EQ(ok.successes().size(), 999u);
  EXPECT_THROW(run_paths<double>(1000, 2, fail_first(2)), FailureBudgetError);
}

TEST(Parallel, ResolveJobs) {
  EXPECT_EQ(resolve_jobs(5), 5);
  EXPECT_THROW(resolve_jobs(0), InputError);
  setenv("POLEBRIDGE_JOBS", "3", 1);
  EXPECT_EQ(resolve_jobs(), 3);
  setenv("POLEBRIDGE_JOBS", "x", 1);
  EXPECT_THROW(resolve_jobs(), InputError);
  unsetenv("POLEBRIDGE_JOBS");
  EXPECT_GE(resolve_jobs(), 1);
}

// ---------------------------------------------------------------------------
// verify (small path counts; the statistical gates live in the acceptance binary)

namespace {

McSettings small(std::size_t paths, int jobs = 1) {
  McSettings s;
  s.n_paths = paths;
  s.seed = 11;
  s.jobs = jobs;
  return s;
}

bool same_report(const McReport& a, const McReport& b) {
  return a.label == b.label && a.estimate_lhs == b.estimate_lhs && a.estimate_rhs == b.estimate_rhs &&
         a.se_lhs == b.se_lhs && a.se_rhs == b.se_rhs && a.se_diff == b.se_diff && a.n_paths == b.n_paths &&
         a.extras == b.extras;
}

}  // namespace

TEST(Verify, IbpResultsIndependentOfWorkerCount) {
  const auto geom = GeometryModel::hyperbolic(2, 1.0);
  const auto grid = make_time_grid(100, 1e-3, Refinement{});
  const auto F = parse_functional("dist2(0.5)", 2);
  const auto G = parse_functional("bump(0.25)", 2);
  const auto h = parse_direction("sine(1,1)", 2);
  const auto a = ibp_check(geom, F, G, h, grid, small(200, 1));
  for (int jobs : {4, 8}) EXPECT_TRUE(same_report(a, ibp_check(geom, F, G, h, grid, small(200, jobs))));
  EXPECT_TRUE(a.paired);
  EXPECT_EQ(a.n_paths, 200u);
}

TEST(Verify, FlatIbpLhsIsDeterministic) {
  // d/dh of x_1(0.5) is sin(pi/2)/pi; the mean over paths is exact
  const auto geom = GeometryModel::euclidean(2);
  const auto grid = make_time_grid(100, 1e-3, Refinement{});
  const auto rep = ibp_check(geom, parse_functional("coord(1,1,0.5)", 2), CylinderFunctional::constant(1.0),
                             parse_direction("sine(1,1)", 2), grid, small(50));
  EXPECT_NEAR(rep.estimate_lhs, std::sqrt(2.0) / M_PI, 1e-12);
  EXPECT_LT(rep.se_lhs, 1e-12);
}

TEST(Verify, IbpRejectsUnpinnedDirection) {
  const auto geom = GeometryModel::euclidean(2);
  const auto grid = make_time_grid(50, 1e-3, Refinement{});
  EXPECT_THROW(ibp_check(geom, CylinderFunctional::constant(1.0), CylinderFunctional::constant(1.0),
                         parse_direction("ramp(1)", 2), grid, small(10)),
               InputError);
}

TEST(Verify, GirsanovFlatConstantFunctional) {
  // in flat space the density is exactly 1 on average; F = 1 makes rhs = 1
  const auto geom = GeometryModel::euclidean(2);
  const auto grid = make_time_grid(200, 1e-3, Refinement{});
  const auto rep = girsanov_check(geom, 0.5, CylinderFunctional::constant(1.0), grid, small(2000));
  EXPECT_DOUBLE_EQ(rep.estimate_rhs, 1.0);
  EXPECT_LT(std::abs(rep.extras.at("z_M")), 4.0);
  EXPECT_NEAR(rep.extras.at("t_node"), 0.5, 0.01);
}

TEST(Verify, RadialLawReportsBothMoments) {
  const auto geom = GeometryModel::euclidean(2);
  const auto grid = make_time_grid(200, 1e-3, Refinement{});
  const auto reps = radial_law_check(geom, {0.5}, grid, small(1000));
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_FALSE(reps[0].paired);
  EXPECT_NEAR(reps[1].extras.at("exact_m2"), 0.75, 5e-3);
  EXPECT_LT(std::abs(reps[1].z_score), 4.0);
}

TEST(Verify, DecayTableShape) {
  const auto geom = GeometryModel::euclidean(2);
  const auto grid = make_time_grid(300, 1e-4, Refinement{});
  const auto table = endpoint_decay_check(geom, parse_direction("sine(1,1)", 2), {0.9, 0.99, 0.999}, grid, small(400));
  ASSERT_EQ(table.rows.size(), 3u);
  ASSERT_EQ(table.margins.size(), 2u);
  EXPECT_TRUE(table.pinned);
  EXPECT_TRUE(table.decreasing(3.0));
  const auto control = endpoint_decay_check(geom, parse_direction("ramp(1)", 2), {0.9, 0.99, 0.999}, grid, small(400));
  EXPECT_FALSE(control.pinned);
  EXPECT_FALSE(control.decreasing(3.0));
}

TEST(Verify, EquivalenceGapShrinks) {
  const auto geom = GeometryModel::euclidean(2);
  const auto base = make_time_grid(100, 1e-3, Refinement{});
  const auto rep = representation_equiv_check(geom, parse_direction("sine(1,1)", 2), base, 2, small(200));
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[1].steps, 200u);
  EXPECT_TRUE(rep.monotone());
}

TEST(Verify, DimensionDispatchCoversDynamic) {
  const auto geom = GeometryModel::hyperbolic(5, 1.0);
  const auto grid = make_time_grid(50, 1e-3, Refinement{});
  const auto rep = divergence_mean_check(geom, parse_direction("sine(1,5)", 5), grid, small(100));
  EXPECT_EQ(rep.n_paths, 100u);
  EXPECT_TRUE(std::isfinite(rep.estimate_rhs));
}
