#include <gtest/gtest.h>

#include <cmath>

#include "hexsim/reward.hpp"
#include "hexsim/rng.hpp"
#include "support/oracles.hpp"

using namespace hexsim;

namespace {

HeightPatch make_patch(std::size_t m, std::size_t n, double fill = 0.0) {
  HeightPatch p;
  p.rows = m;
  p.cols = n;
  p.values.assign(m * n, fill);
  return p;
}

HeightPatch random_patch(Rng& rng, std::size_t m, std::size_t n) {
  auto p = make_patch(m, n);
  for (double& v : p.values) v = rng.uniform() < 0.4 ? rng.uniform(-0.2, 0.5) : 0.0;
  return p;
}

// scale for comparing sums whose terms may cancel
double abs_scale(const HeightPatch& p, double b) {
  double s = 0.0;
  for (double v : p.values) s += 2.0 * (1.0 + std::abs(v - b));
  return s;
}

}  // namespace

TEST(Table, ShippedConfigsMatchTranscribedTable) {
  const auto table = oracle::load_weight_table(HEXSIM_FIXTURES "/table1_weights.txt");
  ASSERT_EQ(table.terms.size(), kTermCount);
  for (Task task : kAllTasks) {
    const auto cfg = shipped_reward_config(task);
    const auto& column = table.by_task.at(std::string(task_name(task)));
    for (std::size_t k = 0; k < kTermCount; ++k) {
      const auto term = parse_term(table.terms[k]);
      ASSERT_TRUE(term) << table.terms[k];
      EXPECT_EQ(cfg.weight(*term), column[k]) << task_name(task) << " " << table.terms[k];
    }
  }
}

TEST(Table, StairsActiveTerms) {
  const auto cfg = shipped_reward_config(Task::stairs);
  std::vector<std::string_view> active;
  for (std::size_t k = 0; k < kTermCount; ++k) {
    if (cfg.weights[k] != 0.0) active.push_back(kTermNames[k]);
  }
  EXPECT_EQ(active, (std::vector<std::string_view>{"forward_velocity", "lateral_velocity", "action_rate",
                                                   "joint_acceleration", "joint_limit", "global_y_deviation"}));
}

TEST(Terms, Expressions) {
  EXPECT_EQ(term_forward_velocity(0.2), 0.2);
  EXPECT_EQ(term_forward_velocity(1.0), 0.4);
  EXPECT_EQ(term_forward_velocity(-0.7), -0.4);
  JointVector a{}, b{};
  a[2] = 0.3;
  EXPECT_EQ(term_action_rate(a, a), 0.0);
  b[0] = 0.1;
  EXPECT_NEAR(term_joint_accel(b, JointVector{}, 0.05), 4.0, 1e-12);
  EXPECT_NEAR(term_global_y_deviation(0.3, 0.1), 0.04, 1e-15);
  EXPECT_EQ(term_collision(true), 1.0);
  EXPECT_EQ(term_collision(false), 0.0);
  FootVector z{0.1, -0.2, 0, 0, 0, 0.05};
  EXPECT_NEAR(term_end_effector_height(z), 0.35, 1e-15);
}

TEST(Terms, JointLimitClips) {
  JointVector q{}, lo{}, hi{};
  lo.fill(-1.0);
  hi.fill(1.0);
  EXPECT_EQ(term_joint_limit(q, lo, hi), 0.0);
  q[3] = 1.1;
  EXPECT_NEAR(term_joint_limit(q, lo, hi), 0.1, 1e-12);
  q[3] = 0.0;
  q[7] = -1.05;
  EXPECT_NEAR(term_joint_limit(q, lo, hi), -0.05, 1e-12);
}

TEST(Functional, AvoidanceWorkedExamples) {
  EXPECT_EQ(avoidance_functional(make_patch(2, 3)), 0.0);
  EXPECT_EQ(avoidance_functional(make_patch(2, 3, 0.1)), 12.0);
  auto one = make_patch(2, 3);
  one.at(1, 1) = 0.1;
  EXPECT_EQ(avoidance_functional(one), 4.0);
  // a single row or column gets weight 1 along that axis
  EXPECT_EQ(avoidance_functional(make_patch(1, 1, 0.2)), 1.0);
  EXPECT_DOUBLE_EQ(avoidance_functional(make_patch(1, 4, 0.2)), 1.0 + 5.0 / 3.0 + 5.0 / 3.0 + 1.0);
  EXPECT_DOUBLE_EQ(avoidance_functional(make_patch(4, 1, 0.2)), 1.0 + 4.0 / 3.0 + 5.0 / 3.0 + 2.0);
}

TEST(Functional, SqueezeWorkedExamples) {
  EXPECT_NEAR(squeeze_functional(make_patch(1, 1), 0.3), -0.6, 1e-15);
  EXPECT_EQ(squeeze_functional(make_patch(1, 1, 0.31), 0.30), 1.0);
  EXPECT_NEAR(squeeze_functional(make_patch(1, 1, 0.31), 0.35), -0.08, 1e-12);
}

TEST(Functional, WeightsHitEndpoints) {
  for (std::size_t n : {2u, 3u, 12u, 13u}) {
    EXPECT_EQ(lateral_weight(0, n), 1.0);
    EXPECT_EQ(lateral_weight(n - 1, n), 1.0);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(lateral_weight(j, n), oracle::w_lateral(j, n), 1e-15);
  }
  EXPECT_EQ(lateral_weight(6, 13), 2.0);
  EXPECT_EQ(ramp_weight(0, 16), 1.0);
  EXPECT_EQ(ramp_weight(15, 16), 2.0);
}

TEST(Functional, MatchesBruteForceOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng.below(24), n = 1 + rng.below(16);
    const auto p = random_patch(rng, m, n);
    const double b = rng.uniform(0.0, 0.4);
    const double fa = avoidance_functional(p), oa = oracle::avoidance(p.values, m, n);
    ASSERT_LE(std::abs(fa - oa), 1e-12 * std::max(1.0, std::abs(oa)));
    const double fs = squeeze_functional(p, b), os = oracle::squeeze(p.values, m, n, b);
    ASSERT_LE(std::abs(fs - os), 1e-12 * abs_scale(p, b));
  }
}

TEST(Functional, AvoidanceIsMonotoneAndMirrorSymmetric) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(20), n = 1 + rng.below(12);
    auto p = random_patch(rng, m, n);
    const double before = avoidance_functional(p);
    auto mirrored = p;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) mirrored.at(i, j) = p.at(i, n - 1 - j);
    }
    ASSERT_NEAR(avoidance_functional(mirrored), before, 1e-12 * std::max(1.0, before));
    p.at(rng.below(m), rng.below(n)) = 0.3;
    ASSERT_GE(avoidance_functional(p), before);
  }
}

TEST(Functional, SqueezeOpenFloorFavoursTallStance) {
  const auto floor = make_patch(16, 12);
  double prev = squeeze_functional(floor, 0.1);
  for (double b = 0.15; b < 0.5; b += 0.05) {
    const double f = squeeze_functional(floor, b);
    EXPECT_LT(f, prev);  // weighted by a negative weight, larger b earns more
    prev = f;
  }
  // everything above the base: plateau
  const auto roof = make_patch(16, 12, 0.6);
  EXPECT_EQ(squeeze_functional(roof, 0.2), squeeze_functional(roof, 0.4));
}

TEST(Compose, LinearInWeightsAndSkipsZeros) {
  Rng rng(4);
  auto patch = random_patch(rng, 16, 12);
  RewardInputs in;
  in.vx_world = 0.3;
  in.vy_body = 0.05;
  in.heading = 0.1;
  in.yaw_rate = -0.2;
  in.y = 0.2;
  in.patch = &patch;
  in.b = 0.3;
  for (double& v : in.action) v = rng.uniform(-1, 1);
  for (double& v : in.torque) v = rng.uniform(-5, 5);
  for (Task task : kAllTasks) {
    const auto cfg = shipped_reward_config(task);
    const auto one = compose(cfg, in);
    const auto two = compose(cfg.scaled(2.0), in);
    EXPECT_EQ(two.total, 2.0 * one.total);
    for (std::size_t k = 0; k < kTermCount; ++k) EXPECT_EQ(one.active[k], cfg.weights[k] != 0.0);
  }
}

TEST(Compose, StraightWalkEarnsForty) {
  RewardInputs in;
  in.vx_world = 0.4;
  const auto r = compose(shipped_reward_config(Task::stairs), in);
  EXPECT_EQ(r.total, 40.0);
}

TEST(Config, LoadSaveAndRejectUnknownTerms) {
  auto cfg = shipped_reward_config(Task::squeeze);
  cfg.weight(Term::torques) = -0.25;
  const auto back = load_reward_config(KeyValueFile::parse(save_reward_config(cfg).to_string()));
  EXPECT_EQ(back.weights, cfg.weights);
  EXPECT_EQ(back.task, Task::squeeze);
  const auto partial = load_reward_config(KeyValueFile::parse("task = stairs\nheading = -2\n"));
  EXPECT_EQ(partial.weight(Term::heading), -2.0);
  EXPECT_EQ(partial.weight(Term::global_y_deviation), -100.0);
  EXPECT_THROW(load_reward_config(KeyValueFile::parse("speed = 1\n")), ConfigError);
  EXPECT_THROW(load_reward_config(KeyValueFile::parse("task = flying\n")), ConfigError);
}

TEST(Config, CsvRowHasEveryColumn) {
  RewardInputs in;
  in.vx_world = 0.1;
  const auto r = compose(shipped_reward_config(Task::joist), in);
  const auto header = reward_csv_header();
  const auto row = reward_csv_row(3, r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.substr(0, 2), "3,");
}
