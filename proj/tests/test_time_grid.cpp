#include <cmath>

#include <gtest/gtest.h>

#include "polebridge/time_grid.hpp"

using namespace polebridge;

TEST(TimeGrid, UniformSmall) {
  const auto g = make_time_grid(2, 0.5, Refinement::uniform());
  ASSERT_EQ(g.nodes().size(), 3u);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 0.25);
  EXPECT_DOUBLE_EQ(g[2], 0.5);
}

TEST(TimeGrid, UniformLarge) {
  const auto g = make_time_grid(1000, 1e-4, Refinement::uniform());
  EXPECT_EQ(g.nodes().size(), 1001u);
  EXPECT_NEAR(g.dt(0), 9.999e-4, 1e-15);
  EXPECT_NEAR(g.dt(999), 9.999e-4, 1e-12);
  EXPECT_DOUBLE_EQ(g.back(), 1.0 - 1e-4);
}

TEST(TimeGrid, GeometricZone) {
  const auto g = make_time_grid(1000, 1e-4, Refinement::geometric(0.99));
  EXPECT_EQ(g.steps(), 1000u);
  EXPECT_DOUBLE_EQ(g.back(), 1.0 - 1e-4);
  ASSERT_LT(g.zone_start(), g.steps());
  for (std::size_t k = g.zone_start(); k + 1 < g.nodes().size(); ++k)
    EXPECT_NEAR((1.0 - g[k + 1]) / (1.0 - g[k]), 0.99, 1e-9) << k;
  for (std::size_t k = 0; k < g.steps(); ++k) EXPECT_GT(g.dt(k), 0.0);
  // uniform step roughly matches the first geometric step
  const double first_geo = g.dt(g.zone_start());
  EXPECT_LT(std::abs(std::log(g.dt(0) / first_geo)), std::log(1.0 / 0.99) * 1.01 + 0.5);
}

TEST(TimeGrid, DefaultRefinementRatio) {
  const auto g = make_time_grid(2000, 1e-4, Refinement{});
  EXPECT_DOUBLE_EQ(g.refinement().ratio, 0.9);
  const std::size_t last = g.steps() - 1;
  EXPECT_NEAR(g.dt(last) / (1.0 - g[last]), 0.1, 1e-9);
}

TEST(TimeGrid, InvalidParameters) {
  EXPECT_THROW(make_time_grid(1, 0.1, Refinement::uniform()), InputError);
  EXPECT_THROW(make_time_grid(10, 0.0, Refinement::uniform()), InputError);
  EXPECT_THROW(make_time_grid(10, 0.6, Refinement::uniform()), InputError);
  EXPECT_THROW(make_time_grid(10, 0.1, Refinement::geometric(1.0)), InputError);
  EXPECT_THROW(TimeGrid::from_nodes({0.0, 0.5, 0.4}), InputError);
  EXPECT_THROW(TimeGrid::from_nodes({0.1, 0.5}), InputError);
}

TEST(TimeGrid, HalvedKeepsCoarseNodes) {
  for (auto ref : {Refinement::uniform(), Refinement::geometric(0.9)}) {
    const auto g = make_time_grid(200, 1e-4, ref);
    const auto h = g.halved();
    ASSERT_EQ(h.steps(), 2 * g.steps());
    for (std::size_t k = 0; k < g.nodes().size(); ++k) EXPECT_EQ(h[2 * k], g[k]);
    for (std::size_t k = 0; k < h.steps(); ++k) EXPECT_GT(h.dt(k), 0.0);
    if (ref.kind == Refinement::Kind::geometric) {
      EXPECT_NEAR(h.refinement().ratio, std::sqrt(0.9), 1e-15);
      const std::size_t k = h.steps() - 1;
      EXPECT_NEAR((1.0 - h[k + 1]) / (1.0 - h[k]), std::sqrt(0.9), 1e-9);
    }
  }
}

TEST(TimeGrid, NearestNode) {
  const auto g = make_time_grid(4, 0.2, Refinement::uniform());  // 0, .2, .4, .6, .8
  EXPECT_EQ(g.nearest_node(0.0), 0u);
  EXPECT_EQ(g.nearest_node(0.29), 1u);
  EXPECT_EQ(g.nearest_node(0.31), 2u);
  EXPECT_EQ(g.nearest_node(0.8), 4u);
  EXPECT_EQ(g.nearest_node(0.85), 4u);
  EXPECT_THROW(g.nearest_node(0.95), InputError);
  EXPECT_THROW(g.nearest_node(-0.1), InputError);
}
