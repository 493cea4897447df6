#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "hexsim/heightmap.hpp"
#include "hexsim/kv_config.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/task.hpp"

using namespace hexsim;

namespace {

LayeredHeightField ramp_x(std::size_t rows, std::size_t cols, double cell) {
  std::vector<float> f(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) f[i * cols + j] = static_cast<float>(j) * 0.25f;
  }
  return {rows, cols, cell, 0.0, 0.0, f};
}

LayeredHeightField random_field(Rng& rng, bool ceiling) {
  const std::size_t rows = 1 + rng.below(30), cols = 1 + rng.below(30);
  std::vector<float> f(rows * cols), c(rows * cols);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = static_cast<float>(rng.uniform(-1.0, 1.0));
    c[k] = rng.uniform() < 0.5 ? std::numeric_limits<float>::quiet_NaN() : f[k] + 0.5f;
  }
  // metadata is stored as f32, so draw values f32 can hold
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  LayeredHeightField field(rows, cols, f32(rng.uniform(0.01, 0.2)), f32(rng.uniform(-5, 5)), f32(rng.uniform(-5, 5)), f);
  if (ceiling) field.set_ceiling(c);
  return field;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_NE(derive_seed(1, 0), derive_seed(0, 1));
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng r(3);
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  // 5 sigma bounds for the sample mean and variance
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, PoissonMean) {
  Rng r(5);
  for (double lambda : {0.5, 4.0, 350.0}) {
    const int n = 20000;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += static_cast<double>(r.poisson(lambda));
    EXPECT_NEAR(s / n, lambda, 5.0 * std::sqrt(lambda / n)) << lambda;
  }
}

TEST(HeightField, RejectsBadShapes) {
  EXPECT_THROW(LayeredHeightField(0, 3, 0.1, 0, 0, {}), GeometryError);
  EXPECT_THROW(LayeredHeightField(2, 2, 0.1, 0, 0, {0, 0, 0}), GeometryError);
  EXPECT_THROW(LayeredHeightField(1, 1, 0.0, 0, 0, {0}), GeometryError);
  EXPECT_THROW(LayeredHeightField(1, 1, 0.1, 0, 0, {std::numeric_limits<float>::infinity()}), GeometryError);
  auto f = LayeredHeightField::flat(2, 2, 0.1, 0, 0, 1.0f);
  EXPECT_THROW(f.set_ceiling({2, 2, 0.5f, 2}), GeometryError);
}

TEST(HeightField, BilinearSampling) {
  const auto f = ramp_x(3, 5, 0.5);
  EXPECT_DOUBLE_EQ(sample_floor(f, 1.0, 0.5), 0.5);    // cell (1, 2) centre
  EXPECT_DOUBLE_EQ(sample_floor(f, 0.25, 0.0), 0.125);  // half way between columns 0 and 1
  EXPECT_DOUBLE_EQ(sample_floor(f, -3.0, 0.0), 0.0);    // clamped to the first column
  EXPECT_DOUBLE_EQ(sample_floor(f, 30.0, 9.0), 1.0);    // clamped to the last column
}

TEST(HeightField, CeilingIsNearestCell) {
  auto f = LayeredHeightField::flat(2, 2, 1.0, 0, 0);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  f.set_ceiling({nan, 0.4f, nan, nan});
  EXPECT_FALSE(sample_ceiling(f, 0.0, 0.0));
  ASSERT_TRUE(sample_ceiling(f, 0.9, 0.2));
  EXPECT_FLOAT_EQ(static_cast<float>(*sample_ceiling(f, 0.9, 0.2)), 0.4f);
  EXPECT_FALSE(sample_ceiling(LayeredHeightField::flat(1, 1, 1, 0, 0), 0, 0));
}

TEST(Patch, TaskDimensions) {
  EXPECT_EQ(task_sensing(Task::stairs).patch.cols(), 12u);
  EXPECT_EQ(task_sensing(Task::stairs).patch.rows(), 16u);
  EXPECT_EQ(task_sensing(Task::squeeze).patch.rows(), 16u);
  EXPECT_EQ(task_sensing(Task::joist).patch.rows(), 16u);
  EXPECT_EQ(task_sensing(Task::avoidance).patch.cols(), 12u);
  EXPECT_EQ(task_sensing(Task::avoidance).patch.rows(), 20u);
}

TEST(Patch, RowsRunFarToNearAndColumnsLeftToRight) {
  // floor height = x + 10 y on a fine grid around the origin
  const std::size_t n = 200;
  std::vector<float> h(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = -2.0 + 0.02 * j, y = -2.0 + 0.02 * i;
      h[i * n + j] = static_cast<float>(x + 10.0 * y);
    }
  }
  LayeredHeightField f(n, n, 0.02, -2.0, -2.0, h);
  const PatchSpec spec{0.6, 0.8, 0.3, 0.05};
  const auto p = extract_patch(f, {0.0, 0.0, 0.0}, spec, PatchLayer::floor_only, 0.1);
  ASSERT_EQ(p.rows, 16u);
  ASSERT_EQ(p.cols, 12u);
  // nearest row centre: 0.1 + 0.3 + 0.025 ahead; far row: 0.4 + 0.775
  EXPECT_NEAR(p.at(15, 6) - 10.0 * (0.3 - 6.5 * 0.05), 0.425, 1e-5);
  EXPECT_NEAR(p.at(0, 6) - 10.0 * (0.3 - 6.5 * 0.05), 1.175, 1e-5);
  EXPECT_GT(p.at(5, 0), p.at(5, 11));  // column 0 lies on +y

  // turned 90 degrees left the forward axis is +y
  const auto q = extract_patch(f, {0.0, 0.0, std::numbers::pi / 2}, spec, PatchLayer::floor_only, 0.1);
  EXPECT_NEAR(q.at(15, 0) - q.at(15, 11), -(11 * 0.05), 1e-4);  // column 0 lies on -x
  EXPECT_NEAR(q.at(0, 3) - q.at(15, 3), 10.0 * 15 * 0.05, 1e-3);
}

TEST(Patch, SqueezeCompositeTakesCeiling) {
  auto f = LayeredHeightField::flat(10, 100, 0.02, 0.0, -0.09);
  std::vector<float> c(1000, std::numeric_limits<float>::quiet_NaN());
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 40; j < 100; ++j) c[i * 100 + j] = 0.3f;
  }
  f.set_ceiling(c);
  const PatchSpec spec{0.1, 1.0, 0.0, 0.1};
  const auto floor_only = extract_patch(f, {0, 0, 0}, spec, PatchLayer::floor_only);
  const auto comp = extract_patch(f, {0, 0, 0}, spec, PatchLayer::squeeze_composite);
  EXPECT_EQ(floor_only.at(0, 0), 0.0);
  EXPECT_FLOAT_EQ(static_cast<float>(comp.at(0, 0)), 0.3f);  // x = 0.95 under the slab
  EXPECT_EQ(comp.at(9, 0), 0.0);                              // x = 0.05, open
}

TEST(Hxm, RoundTripIsExact) {
  Rng rng(99);
  for (int k = 0; k < 60; ++k) {
    const auto f = random_field(rng, k % 2 == 0);
    const auto bytes = encode_hxm(f);
    const auto g = decode_hxm(bytes);
    ASSERT_TRUE(g == f);
    ASSERT_EQ(encode_hxm(g), bytes);
  }
}

TEST(Hxm, RejectsCorruptInput) {
  Rng rng(1);
  const auto bytes = encode_hxm(random_field(rng, true));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_hxm(bad), GeometryError);
  EXPECT_THROW(decode_hxm(std::span(bytes).first(bytes.size() - 1)), GeometryError);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_hxm(longer), GeometryError);
}

TEST(KeyValue, ParsesCommentsQuotesAndOverrides) {
  const auto kv = KeyValueFile::parse("# c\n a = 1.5 \n[section]\nname = \"x y\"\na = 2\n");
  EXPECT_DOUBLE_EQ(kv.get_double("a", 0), 2.0);
  EXPECT_EQ(kv.get_string("name"), "x y");
  EXPECT_EQ(kv.get_int("missing", 7), 7);
  EXPECT_THROW(KeyValueFile::parse("novalue\n"), ConfigError);
  EXPECT_THROW(kv.get_int("name", 0), ConfigError);
}
