#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hexsim/terrain.hpp"

using namespace hexsim;

namespace {

std::vector<float> floor_row(const LayeredHeightField& f, std::size_t i) {
  std::vector<float> row(f.cols());
  for (std::size_t j = 0; j < f.cols(); ++j) row[j] = f.floor_at(i, j);
  return row;
}

}  // namespace

TEST(Curriculum, StairEndpointsAreExact) {
  const auto lo = stair_params_for_level({0, 10});
  const auto hi = stair_params_for_level({10, 10});
  EXPECT_EQ(lo.riser, 0.045);
  EXPECT_EQ(lo.tread, 0.30);
  EXPECT_EQ(hi.riser, 0.18);
  EXPECT_EQ(hi.tread, 0.18);
  for (int total : {1, 3, 7, 25}) {
    EXPECT_EQ(stair_params_for_level({total, total}).riser, 0.18) << total;
    EXPECT_EQ(stair_params_for_level({total, total}).tread, 0.18) << total;
  }
}

TEST(Curriculum, StairsGetHarderMonotonically) {
  double riser = 0.0, tread = 1.0;
  for (int l = 0; l <= 20; ++l) {
    const auto p = stair_params_for_level({l, 20});
    EXPECT_GE(p.riser, riser);
    EXPECT_LE(p.tread, tread);
    riser = p.riser;
    tread = p.tread;
  }
}

TEST(Curriculum, RejectsLevelOutOfRange) {
  EXPECT_THROW(stair_params_for_level({11, 10}), TerrainError);
  EXPECT_THROW(stair_params_for_level({-1, 10}), TerrainError);
  EXPECT_THROW(stair_params_for_level({0, 0}), TerrainError);
}

TEST(Curriculum, DensityFormula) {
  const double d_final = 0.15;
  for (int total : {1, 4, 10, 33}) {
    for (int l = 0; l <= total; ++l) {
      const double expected = (2.0 * l / total) * d_final;
      EXPECT_EQ(obstacle_density_for_level({l, total}, d_final), expected);
      EXPECT_EQ(obstacle_density_for_level({l, total}, d_final, true), std::min(expected, d_final));
    }
  }
}

TEST(Curriculum, TunnelClearanceSchedule) {
  for (int total : {1, 3, 4, 10, 40}) {
    std::set<double> seen;
    double prev = 1.0;
    for (int l = 0; l <= total; ++l) {
      const double c = tunnel_clearance_for_level({l, total});
      EXPECT_LE(c, prev);
      prev = c;
      seen.insert(c);
    }
    EXPECT_EQ(tunnel_clearance_for_level({0, total}), 0.37);
    EXPECT_EQ(tunnel_clearance_for_level({total, total}), 0.31);
    if (total >= 3) {
      EXPECT_EQ(seen, (std::set<double>{0.37, 0.35, 0.33, 0.31})) << total;
    }
  }
}

TEST(Stairs, RisersAreExactAndTreadsJittered) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    StairParams p = stair_params_for_level({3, 10});
    const auto t = generate_stairs(p, seed);
    ASSERT_EQ(t.layout.riser_x.size(), 8u);
    for (double tread : t.layout.treads) {
      EXPECT_GE(tread, p.tread * 0.8 - 1e-12);
      EXPECT_LE(tread, p.tread * 1.2 + 1e-12);
    }
    const auto row = floor_row(t.field, t.field.rows() / 2);
    std::set<float> levels(row.begin(), row.end());
    EXPECT_EQ(levels.size(), 9u);
    int k = 0;
    for (float h : levels) EXPECT_EQ(h, static_cast<float>(k++ * p.riser));
    // every row carries the same profile
    EXPECT_EQ(floor_row(t.field, 0), row);
  }
}

TEST(Stairs, LandingsAndDescent) {
  StairParams p;
  p.landing_interval = 3;
  p.step_count = 7;
  const auto t = generate_stairs(p, 1);
  EXPECT_GE(t.layout.treads[2], 1.0);
  EXPECT_GE(t.layout.treads[5], 1.0);
  EXPECT_LT(t.layout.treads[0], 1.0);

  p.direction = StairDirection::down;
  const auto d = generate_stairs(p, 1);
  const auto row = floor_row(d.field, 0);
  EXPECT_FLOAT_EQ(row.front(), static_cast<float>(7 * p.riser));
  EXPECT_EQ(row.back(), 0.0f);
}

TEST(Stairs, SpawnSitsBeforeFirstRiser) {
  const auto t = generate_stairs(StairParams{}, 0);
  EXPECT_NEAR(t.layout.riser_x.front() - t.layout.spawn_front_x, 0.20, 1e-12);
}

TEST(Obstacles, SpacingBandAndHeights) {
  ObstacleFieldParams params;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = generate_obstacle_field(params, 0.3, seed);
    const auto& obs = t.layout.obstacles;
    for (std::size_t a = 0; a < obs.size(); ++a) {
      EXPECT_GE(obs[a].x, params.spawn_clear);
      EXPECT_LE(obs[a].x, params.corridor_length - params.end_clear);
      EXPECT_LE(std::abs(obs[a].y), params.corridor_halfwidth);
      for (std::size_t b = a + 1; b < obs.size(); ++b) {
        EXPECT_GE(std::hypot(obs[a].x - obs[b].x, obs[a].y - obs[b].y), params.min_spacing);
      }
      const auto& f = t.field;
      EXPECT_EQ(f.floor_at(f.nearest_row(obs[a].y), f.nearest_col(obs[a].x)), static_cast<float>(obs[a].height));
    }
  }
}

TEST(Obstacles, CountFollowsDensity) {
  ObstacleFieldParams params;
  const double density = 0.2;
  double total = 0.0;
  const int n = 200;
  for (int seed = 0; seed < n; ++seed) total += generate_obstacle_field(params, density, seed).layout.obstacles.size();
  const double mean = density * params.placement_area();
  EXPECT_NEAR(total / n, mean, 5.0 * std::sqrt(mean / n));
}

TEST(Obstacles, InfeasibleDensityRejected) {
  EXPECT_THROW(generate_obstacle_field(ObstacleFieldParams{}, 5.0, 0), TerrainError);
  EXPECT_THROW(generate_obstacle_field(ObstacleFieldParams{}, -1.0, 0), TerrainError);
  ObstacleFieldParams empty;
  empty.shape_set.clear();
  EXPECT_THROW(generate_obstacle_field(empty, 0.1, 0), TerrainError);
}

TEST(Obstacles, ZeroDensityIsFlat) {
  const auto t = generate_obstacle_field(ObstacleFieldParams{}, 0.0, 3);
  EXPECT_TRUE(t.layout.obstacles.empty());
  for (float h : t.field.floor_data()) ASSERT_EQ(h, 0.0f);
}

TEST(Tunnel, CeilingLiesAtClearance) {
  TunnelParams p;
  p.clearance = 0.33;
  p.tunnel_length = 1.0;
  p.obstacle_width = 1.0;
  p.approach_distance = 1.0;
  const auto t = generate_tunnel(p, 0);
  const auto& f = t.field;
  ASSERT_TRUE(f.has_ceiling());
  EXPECT_FLOAT_EQ(static_cast<float>(*sample_ceiling(f, 1.5, 0.0)), 0.33f);
  EXPECT_FALSE(sample_ceiling(f, 0.5, 0.0));
  EXPECT_FALSE(sample_ceiling(f, 2.5, 0.0));
  EXPECT_FALSE(sample_ceiling(f, 1.5, 0.7));  // beyond half the slab width
  EXPECT_NEAR(t.layout.slabs.front().first - t.layout.spawn_front_x, 0.30, 1e-12);
}

TEST(Tunnel, ThinObstacleUsesThickness) {
  TunnelParams p;
  p.tunnel_length = 0.01;
  p.obstacle_thickness = 0.08;
  const auto t = generate_tunnel(p, 0);
  EXPECT_NEAR(t.layout.slabs.front().second - t.layout.slabs.front().first, 0.08, 1e-12);
}

TEST(Tunnel, SecondSlabFollowsGap) {
  TunnelParams p;
  p.tunnel_length = 0.4;
  p.second_gap = 1.2;
  p.second_length = 0.4;
  const auto t = generate_tunnel(p, 0);
  ASSERT_EQ(t.layout.slabs.size(), 2u);
  EXPECT_NEAR(t.layout.slabs[1].first - t.layout.slabs[0].second, 1.2, 1e-12);
  EXPECT_FALSE(sample_ceiling(t.field, t.layout.slabs[0].second + 0.6, 0.0));
}

TEST(Tunnel, RandomizationStaysInRange) {
  const TunnelRandomization r;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = tunnel_params_for_level({5, 10}, seed);
    EXPECT_GE(p.tunnel_length, r.length_min);
    EXPECT_LE(p.tunnel_length, r.length_max);
    EXPECT_GE(p.approach_distance, r.approach_min);
    EXPECT_LE(p.obstacle_width, r.width_max);
    EXPECT_EQ(p.clearance, tunnel_clearance_for_level({5, 10}));
  }
}

TEST(Joists, PeriodIsExact) {
  JoistParams p;
  const auto t = generate_joists(p, 4);
  ASSERT_GE(t.layout.joist_x.size(), 3u);
  for (std::size_t k = 1; k < t.layout.joist_x.size(); ++k) {
    EXPECT_NEAR(t.layout.joist_x[k] - t.layout.joist_x[k - 1], p.spacing, 1e-9);
  }
  const auto row = floor_row(t.field, 0);
  EXPECT_EQ(*std::max_element(row.begin(), row.end()), static_cast<float>(p.height));
  EXPECT_THROW(generate_joists(JoistParams{0.04, 0.04, 0.05}, 0), TerrainError);
}

TEST(Generation, SameSeedSameBytes) {
  for (Task task : kAllTasks) {
    for (int level : {0, 5, 10}) {
      const auto spec = terrain_for_level(task, {level, 10}, 17);
      const auto a = generate_terrain(spec, 17);
      const auto b = generate_terrain(terrain_for_level(task, {level, 10}, 17), 17);
      EXPECT_EQ(encode_hxm(a.field), encode_hxm(b.field)) << task_name(task) << " " << level;
    }
  }
  EXPECT_NE(encode_hxm(generate_terrain(terrain_for_level(Task::stairs, {5, 10}, 1), 1).field),
            encode_hxm(generate_terrain(terrain_for_level(Task::stairs, {5, 10}, 2), 2).field));
}

TEST(Generation, TopLevelAvoidanceIsFeasible) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_NO_THROW(generate_terrain(terrain_for_level(Task::avoidance, {10, 10}, seed), seed));
  }
}
