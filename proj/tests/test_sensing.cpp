#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hexsim/sensing.hpp"
#include "support/oracles.hpp"

using namespace hexsim;

namespace {

// Floor 0 up to x = 1.0, then a 5 m block. Cell boundaries fall on multiples of 0.02.
LayeredHeightField wall_field() {
  const std::size_t rows = 100, cols = 100;
  std::vector<float> h(rows * cols, 0.0f);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 50; j < cols; ++j) h[i * cols + j] = 5.0f;
  }
  return {rows, cols, 0.02, 0.01, -1.0, h};
}

BaseState standing_at_origin() {
  BaseState b;
  b.position = {0.0, 0.0, 0.37};
  return b;
}

}  // namespace

TEST(Camera, ImageIs320By240) {
  const auto img = render_depth(CameraModel{}, standing_at_origin(), wall_field());
  EXPECT_EQ(img.width, 320);
  EXPECT_EQ(img.height, 240);
  EXPECT_EQ(img.data.size(), 320u * 240u);
  CameraModel bad;
  bad.width = 64;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Camera, WallDepthMatchesOracle) {
  const auto field = wall_field();
  const auto base = standing_at_origin();
  for (double tilt : {0.0, 30.0 * kDeg}) {
    CameraModel cam;
    cam.tilt = tilt;
    const auto img = render_depth(cam, base, field);
    const Eigen::Vector3d eye = camera_position(cam, base);
    int checked = 0;
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const double right = cam.pixel_x(u), up = cam.pixel_y(v);
        // ray = forward + right * r + up * u in camera axes
        const double dir_x = std::cos(tilt) + up * std::sin(tilt);
        const double dir_z = -std::sin(tilt) + up * std::cos(tilt);
        double expect = cam.far_clip;
        const double wall = oracle::wall_depth(eye.x(), tilt, right, up, 1.0);
        const double z_at_wall = eye.z() + wall * dir_z;
        if (dir_z < 0.0) {
          const double floor_depth = -eye.z() / dir_z;
          const double x_at_floor = eye.x() + floor_depth * dir_x;
          if (std::abs(x_at_floor - 1.0) < 0.01) continue;  // corner pixels
          expect = x_at_floor < 1.0 ? floor_depth : wall;
        } else if (z_at_wall < 5.0) {
          expect = wall;
        }
        expect = std::min(expect, cam.far_clip);
        ASSERT_NEAR(img.at(u, v), expect, 0.005) << u << "," << v << " tilt " << tilt;
        ++checked;
      }
    }
    EXPECT_GT(checked, 320 * 230);
  }
}

TEST(Camera, CentrePixelOnWallAtOneMetre) {
  CameraModel cam;
  const auto base = standing_at_origin();
  const auto img = render_depth(cam, base, wall_field());
  const double eye_x = camera_position(cam, base).x();
  const double expect = oracle::wall_depth(eye_x, 0.0, cam.pixel_x(160), cam.pixel_y(120), 1.0);
  EXPECT_NEAR(img.at(160, 120), expect, std::max(0.005, 0.02 / 4));
}

TEST(Camera, FlatFloorDepthGrowsTowardHorizon) {
  CameraModel cam = CameraModel::for_task(Task::stairs);
  const auto img = render_depth(cam, standing_at_origin(), LayeredHeightField::flat(50, 50, 0.1, -2.5, -2.5));
  for (int v = cam.height - 1; v > 0; --v) EXPECT_LE(img.at(160, v), img.at(160, v - 1));
  EXPECT_FLOAT_EQ(img.at(160, 0), static_cast<float>(cam.far_clip));
}

TEST(Camera, SceneSurfacesLieOnTheHeightField) {
  Rng rng(6);
  const std::size_t n = 60;
  std::vector<float> h(n * n);
  for (auto& v : h) v = static_cast<float>(0.05 * rng.below(4));
  const LayeredHeightField field(n, n, 0.05, -1.5, -1.5, h);
  const auto scene = build_depth_scene(field);
  CameraModel cam = CameraModel::for_task(Task::stairs);
  for (int trial = 0; trial < 5; ++trial) {
    BaseState base;
    base.position = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.6};
    base.set_rpy(0.0, 0.0, rng.uniform(-3.0, 3.0));
    const auto img = render_depth(cam, base, scene);
    const Eigen::Matrix3d rot = camera_rotation(cam, base);
    const Eigen::Vector3d eye = camera_position(cam, base);
    for (int v = 0; v < cam.height; v += 7) {
      for (int u = 0; u < cam.width; u += 7) {
        const float d = img.at(u, v);
        if (d >= cam.far_clip) continue;
        const Eigen::Vector3d ray = rot * Eigen::Vector3d(1.0, -cam.pixel_x(u), cam.pixel_y(v));
        const Eigen::Vector3d p = eye + static_cast<double>(d) * ray;
        const float top = field.floor_at(field.nearest_row(p.y()), field.nearest_col(p.x()));
        if (std::abs(p.z() - top) < 1e-3) continue;
        // otherwise the hit is on a vertical step between cells
        const double cx = (p.x() - field.origin_x()) / field.cell_size() + 0.5;
        const double cy = (p.y() - field.origin_y()) / field.cell_size() + 0.5;
        const double to_edge = std::min(std::abs(cx - std::round(cx)), std::abs(cy - std::round(cy)));
        ASSERT_LT(to_edge * field.cell_size(), 1e-3) << "pixel " << u << "," << v;
      }
    }
  }
}

TEST(Camera, PgmHasHeaderAndSixteenBitSamples) {
  const auto img = render_depth(CameraModel{}, standing_at_origin(), wall_field());
  const auto path = std::filesystem::temp_directory_path() / "hexsim_test_depth.pgm";
  save_pgm(img, path.string());
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 320);
  EXPECT_EQ(h, 240);
  EXPECT_EQ(maxval, 65535);
  std::vector<unsigned char> body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_EQ(body.size(), 320u * 240u * 2u);
  const std::size_t k = 120 * 320 + 160;
  EXPECT_EQ((body[2 * k] << 8) | body[2 * k + 1], std::lround(img.at(160, 120) * 1000.0));
  std::filesystem::remove(path);
}

TEST(PoseSensor, NoiseHasRequestedSpread) {
  BaseState base;
  base.position = {1.0, -2.0, 0.4};
  base.set_rpy(0.1, -0.05, 0.7);
  const PoseNoise noise{0.01, 0.02};
  Rng rng(77);
  const int n = 20000;
  double s2 = 0.0, a2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto est = sense_pose(base, noise, rng);
    ASSERT_NEAR(est.orientation.norm(), 1.0, 1e-12);
    s2 += (est.position - base.position).squaredNorm();
    a2 += std::pow(est.orientation.angularDistance(base.orientation), 2);
  }
  // position error per axis has variance sigma^2; the rotation vector has 3 sigma^2
  EXPECT_NEAR(std::sqrt(s2 / (3.0 * n)), 0.01, 0.01 * 0.03);
  EXPECT_NEAR(std::sqrt(a2 / (3.0 * n)), 0.02, 0.02 * 0.03);
}

TEST(PoseSensor, ZeroNoiseIsExactAndSeedIsDeterministic) {
  BaseState base;
  base.position = {0.5, 0.25, 0.37};
  base.set_rpy(0.0, 0.0, 1.0);
  const auto est = sense_pose(base, PoseNoise{}, 3);
  EXPECT_EQ(est.position, base.position);
  EXPECT_NEAR(est.orientation.angularDistance(base.orientation), 0.0, 1e-12);
  const PoseNoise noise{0.1, 0.1};
  EXPECT_EQ(pack_pose(sense_pose(base, noise, 9)), pack_pose(sense_pose(base, noise, 9)));
}

TEST(Observation, ProprioLayout) {
  const auto g = RobotGeometry::default_profile();
  JointState js;
  JointVector action{};
  for (int k = 0; k < kJointCount; ++k) {
    js.angles[k] = 0.01 * k;
    js.velocities[k] = -0.01 * k;
    action[k] = 1.0 + k;
  }
  BaseState base;
  base.position = {0.1, 0.2, 0.9};
  base.set_rpy(0.0, 0.0, 0.3);
  base.linear_velocity = {1, 2, 3};
  base.angular_velocity = {4, 5, 6};
  const auto field = LayeredHeightField::flat(40, 40, 0.05, -1.0, -1.0, 0.5f);
  const auto obs = assemble_teacher(field, g, js, base, action, task_sensing(Task::stairs));
  ASSERT_EQ(obs.proprio.size(), 67u);
  EXPECT_EQ(obs.proprio[5], 0.05);
  EXPECT_EQ(obs.proprio[18 + 5], -0.05);
  EXPECT_EQ(obs.proprio[36], 0.1);
  EXPECT_EQ(obs.proprio[38], 0.9);
  EXPECT_NEAR(obs.proprio[39], std::cos(0.15), 1e-15);
  EXPECT_NEAR(obs.proprio[42], std::sin(0.15), 1e-15);
  EXPECT_EQ(obs.proprio[43], 1.0);
  EXPECT_EQ(obs.proprio[48], 6.0);
  EXPECT_EQ(obs.proprio[49], 1.0);
  EXPECT_EQ(obs.proprio[66], 18.0);
  // the patch is relative to the ground under the robot
  EXPECT_EQ(obs.patch.rows, 16u);
  for (double v : obs.patch.values) EXPECT_EQ(v, 0.0);
}

TEST(Observation, StudentWithoutSceneHasNoDepthData) {
  BaseState base;
  JointVector action{};
  action[3] = 0.5;
  const auto obs = assemble_student(CameraModel{}, nullptr, base, PoseEstimate{}, action);
  EXPECT_TRUE(obs.depth.data.empty());
  EXPECT_EQ(obs.pose[3], 1.0);
  EXPECT_EQ(obs.last_action[3], 0.5);
}
