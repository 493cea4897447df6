#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexsim/heightmap.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/robot.hpp"
#include "hexsim/task.hpp"

namespace hexsim {

struct CameraModel {
  static constexpr int kWidth = 320;
  static constexpr int kHeight = 240;
  int width = kWidth;
  int height = kHeight;
  double hfov = 70.0 * kDeg;
  double tilt = 0.0;  // below horizontal
  Eigen::Vector3d offset{0.11, 0.0, -0.03};  // from the base origin, base frame
  double near_clip = 0.1;
  double far_clip = 4.0;

  double focal() const { return 0.5 * width / std::tan(0.5 * hfov); }

  /// Normalized image-plane coordinates of pixel (u, v): right, up.
  double pixel_x(int u) const { return (u + 0.5 - 0.5 * width) / focal(); }
  double pixel_y(int v) const { return (0.5 * height - v - 0.5) / focal(); }

  void validate() const {
    if (width != kWidth || height != kHeight) throw std::invalid_argument("camera: image must be 320x240");
    if (!(hfov > 0.0 && hfov < std::numbers::pi)) throw std::invalid_argument("camera: bad field of view");
    if (!(near_clip > 0.0 && far_clip > near_clip)) throw std::invalid_argument("camera: bad depth range");
  }

  static CameraModel for_task(Task task, const RobotGeometry& g = RobotGeometry::default_profile()) {
    CameraModel c;
    c.tilt = task_sensing(task).camera_tilt;
    c.offset = g.camera_offset;
    return c;
  }
};

/// Depth along the optical axis, metres, row-major with row 0 at the top.
struct DepthImage {
  int width = CameraModel::kWidth;
  int height = CameraModel::kHeight;
  std::vector<float> data;

  float at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
};

// ---------------------------------------------------------------------------
// Scene

/// Planar quad with an outward normal, world frame.
struct SceneQuad {
  std::array<Eigen::Vector3d, 4> v;
  Eigen::Vector3d normal;
};

/// Box geometry of a height field: one quad per merged run of equal-height cells,
/// vertical walls at every height step, slab undersides and slab sides. Edge cells
/// are stretched outward so the scene matches the clamped lookups of sample_floor.
struct DepthScene {
  std::vector<SceneQuad> quads;
};

namespace detail {

struct Rect {
  std::size_t a0, a1;  // first/last index along the merge axis
  std::size_t b0, b1;  // first/last index along the sweep axis
  float lo, hi;
};

/// Merges equal-valued runs of `value(i, j)` (NaN = empty) into rectangles.
template <class F>
std::vector<Rect> merge_runs(std::size_t rows, std::size_t cols, F value) {
  std::vector<Rect> done, open;
  auto same = [](float x, float y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<Rect> row;
    std::size_t j = 0;
    while (j < cols) {
      const float h = value(i, j);
      std::size_t k = j + 1;
      while (k < cols && same(value(i, k), h)) ++k;
      if (!std::isnan(h)) row.push_back({j, k - 1, i, i, h, h});
      j = k;
    }
    std::vector<Rect> next;
    std::size_t oi = 0;
    for (auto& r : row) {
      while (oi < open.size() && open[oi].a0 < r.a0) done.push_back(open[oi++]);
      if (oi < open.size() && open[oi].a0 == r.a0 && open[oi].a1 == r.a1 && open[oi].lo == r.lo) {
        r.b0 = open[oi++].b0;
      }
      next.push_back(r);
    }
    while (oi < open.size()) done.push_back(open[oi++]);
    open = std::move(next);
  }
  done.insert(done.end(), open.begin(), open.end());
  return done;
}

}  // namespace detail

inline DepthScene build_depth_scene(const LayeredHeightField& field, double extension = 10.0) {
  const std::size_t rows = field.rows(), cols = field.cols();
  const double c = field.cell_size();
  std::vector<double> xb(cols + 1), yb(rows + 1);
  for (std::size_t j = 0; j <= cols; ++j) xb[j] = field.origin_x() + (static_cast<double>(j) - 0.5) * c;
  for (std::size_t i = 0; i <= rows; ++i) yb[i] = field.origin_y() + (static_cast<double>(i) - 0.5) * c;
  xb.front() -= extension;
  xb.back() += extension;
  yb.front() -= extension;
  yb.back() += extension;
  constexpr float kSlabTop = 1000.0f;

  DepthScene scene;
  auto horizontal = [&](const detail::Rect& r, bool facing_up) {
    const double x0 = xb[r.a0], x1 = xb[r.a1 + 1], y0 = yb[r.b0], y1 = yb[r.b1 + 1];
    const double z = r.lo;
    scene.quads.push_back({{{{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}}},
                           Eigen::Vector3d(0, 0, facing_up ? 1.0 : -1.0)});
  };
  for (const auto& r : detail::merge_runs(rows, cols, [&](std::size_t i, std::size_t j) { return field.floor_at(i, j); })) {
    horizontal(r, true);
  }
  if (field.has_ceiling()) {
    for (const auto& r :
         detail::merge_runs(rows, cols, [&](std::size_t i, std::size_t j) { return field.ceiling_at(i, j); })) {
      horizontal(r, false);
    }
  }

  // Walls: floor steps between neighbouring cells, and slab sides (a slab next to
  // open air extends up to kSlabTop).
  auto step_band = [](float fa, float fb, float* lo, float* hi) {
    *lo = std::min(fa, fb);
    *hi = std::max(fa, fb);
    return *hi > *lo;
  };
  auto ceiling_band = [](float ca, float cb, float* lo, float* hi) {
    if (std::isnan(ca) && std::isnan(cb)) return false;
    if (std::isnan(ca) || std::isnan(cb)) {
      *lo = std::isnan(ca) ? cb : ca;
      *hi = kSlabTop;
      return true;
    }
    *lo = std::min(ca, cb);
    *hi = std::max(ca, cb);
    return *hi > *lo;
  };

  // walls on the boundaries x = xb[j + 1] between columns j and j + 1
  for (int layer = 0; layer < (field.has_ceiling() ? 2 : 1); ++layer) {
    for (std::size_t j = 0; j + 1 < cols; ++j) {
      std::size_t i = 0;
      while (i < rows) {
        float lo = 0, hi = 0;
        auto band = [&](std::size_t ii, float* l, float* h) {
          return layer == 0 ? step_band(field.floor_at(ii, j), field.floor_at(ii, j + 1), l, h)
                            : ceiling_band(field.ceiling_at(ii, j), field.ceiling_at(ii, j + 1), l, h);
        };
        if (!band(i, &lo, &hi)) {
          ++i;
          continue;
        }
        std::size_t k = i + 1;
        float l2 = 0, h2 = 0;
        while (k < rows && band(k, &l2, &h2) && l2 == lo && h2 == hi) ++k;
        const double x = xb[j + 1];
        scene.quads.push_back({{{{x, yb[i], lo}, {x, yb[k], lo}, {x, yb[k], hi}, {x, yb[i], hi}}}, Eigen::Vector3d(1, 0, 0)});
        i = k;
      }
    }
    // walls on the boundaries y = yb[i + 1] between rows i and i + 1
    for (std::size_t i = 0; i + 1 < rows; ++i) {
      std::size_t j = 0;
      while (j < cols) {
        float lo = 0, hi = 0;
        auto band = [&](std::size_t jj, float* l, float* h) {
          return layer == 0 ? step_band(field.floor_at(i, jj), field.floor_at(i + 1, jj), l, h)
                            : ceiling_band(field.ceiling_at(i, jj), field.ceiling_at(i + 1, jj), l, h);
        };
        if (!band(j, &lo, &hi)) {
          ++j;
          continue;
        }
        std::size_t k = j + 1;
        float l2 = 0, h2 = 0;
        while (k < cols && band(k, &l2, &h2) && l2 == lo && h2 == hi) ++k;
        const double y = yb[i + 1];
        scene.quads.push_back({{{{xb[j], y, lo}, {xb[k], y, lo}, {xb[k], y, hi}, {xb[j], y, hi}}}, Eigen::Vector3d(0, 1, 0)});
        j = k;
      }
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Rendering

/// Camera orientation in the world: base rotation followed by the downward tilt.
inline Eigen::Matrix3d camera_rotation(const CameraModel& cam, const BaseState& base) {
  return rotation_rpy(base.roll, base.pitch, base.yaw) * rotation_rpy(0.0, cam.tilt, 0.0);
}

inline Eigen::Vector3d camera_position(const CameraModel& cam, const BaseState& base) {
  return base.position + rotation_rpy(base.roll, base.pitch, base.yaw) * cam.offset;
}

/// Depth image by z-buffered rasterization of the scene. Each pixel takes the depth
/// of the nearest surface through its centre, so results are exact for the box
/// geometry up to float rounding. Misses read far_clip; hits nearer than near_clip
/// read near_clip.
inline void render_depth(const CameraModel& cam, const BaseState& base, const DepthScene& scene, DepthImage& out,
                         std::vector<float>& inv_buffer) {
  cam.validate();
  const int W = cam.width, H = cam.height;
  const double f = cam.focal();
  const Eigen::Matrix3d rot_t = camera_rotation(cam, base).transpose();
  const Eigen::Vector3d eye = camera_position(cam, base);
  inv_buffer.assign(static_cast<std::size_t>(W) * H, 0.0f);
  constexpr double kClip = 1e-4;
  constexpr double kEdgeEps = 1e-9;

  // camera coordinates: (forward, right, up)
  auto to_cam = [&](const Eigen::Vector3d& p) -> Eigen::Vector3d {
    const Eigen::Vector3d q = rot_t * (p - eye);
    return {q.x(), -q.y(), q.z()};
  };

  std::array<Eigen::Vector3d, 8> poly, clipped;
  std::array<Eigen::Vector2d, 8> proj;
  for (const auto& quad : scene.quads) {
    int n = 0;
    bool any_front = false, any_near = false;
    for (int k = 0; k < 4; ++k) {
      poly[k] = to_cam(quad.v[k]);
      any_front |= poly[k].x() > kClip;
      any_near |= poly[k].x() < cam.far_clip;
    }
    if (!any_front || !any_near) continue;
    // plane in camera coordinates: n . X = d
    const Eigen::Vector3d nw = rot_t * quad.normal;
    const Eigen::Vector3d nc(nw.x(), -nw.y(), nw.z());
    const double d = nc.dot(poly[0]);
    if (std::abs(d) < 1e-12) continue;  // plane through the eye, seen edge-on

    // clip against forward >= kClip
    for (int k = 0; k < 4; ++k) {
      const Eigen::Vector3d& a = poly[k];
      const Eigen::Vector3d& b = poly[(k + 1) % 4];
      const bool ina = a.x() >= kClip, inb = b.x() >= kClip;
      if (ina) clipped[n++] = a;
      if (ina != inb) clipped[n++] = a + (b - a) * ((kClip - a.x()) / (b.x() - a.x()));
    }
    if (n < 3) continue;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int k = 0; k < n; ++k) {
      proj[k] = {clipped[k].y() / clipped[k].x(), clipped[k].z() / clipped[k].x()};
      xmin = std::min(xmin, proj[k].x());
      xmax = std::max(xmax, proj[k].x());
      ymin = std::min(ymin, proj[k].y());
      ymax = std::max(ymax, proj[k].y());
    }
    double area = 0.0;
    for (int k = 0; k < n; ++k) {
      const auto& a = proj[k];
      const auto& b = proj[(k + 1) % n];
      area += a.x() * b.y() - b.x() * a.y();
    }
    if (std::abs(area) < 1e-18) continue;
    const double orient = area > 0 ? 1.0 : -1.0;

    // pixel rows covered: y = (H/2 - v - 0.5) / f
    const int v0 = std::max(0, static_cast<int>(std::ceil(0.5 * H - 0.5 - ymax * f - 1e-7)));
    const int v1 = std::min(H - 1, static_cast<int>(std::floor(0.5 * H - 0.5 - ymin * f + 1e-7)));
    if (v0 > v1) continue;
    const double umin_f = xmin * f + 0.5 * W - 0.5, umax_f = xmax * f + 0.5 * W - 0.5;
    if (umax_f < -1.0 || umin_f > W) continue;

    // inverse depth is affine in the image plane: (n_f + n_r x + n_u y) / d
    const double ia = nc.x() / d, ib = nc.y() / d, ic = nc.z() / d;
    for (int v = v0; v <= v1; ++v) {
      const double y = cam.pixel_y(v);
      double lo = xmin - 1e-7, hi = xmax + 1e-7;
      // each edge: orient * ((bx - ax) (y - ay) - (by - ay) (x - ax)) >= -eps
      bool empty = false;
      for (int k = 0; k < n && !empty; ++k) {
        const auto& a = proj[k];
        const auto& b = proj[(k + 1) % n];
        const double coef = -orient * (b.y() - a.y());
        const double cst = orient * ((b.x() - a.x()) * (y - a.y()) + (b.y() - a.y()) * a.x());
        if (std::abs(coef) < 1e-15) {
          if (cst < -kEdgeEps) empty = true;
        } else if (coef > 0) {
          lo = std::max(lo, (-kEdgeEps - cst) / coef);
        } else {
          hi = std::min(hi, (-kEdgeEps - cst) / coef);
        }
      }
      if (empty || lo > hi) continue;
      const int u0 = std::max(0, static_cast<int>(std::ceil(lo * f + 0.5 * W - 0.5)));
      const int u1 = std::min(W - 1, static_cast<int>(std::floor(hi * f + 0.5 * W - 0.5)));
      float* row = inv_buffer.data() + static_cast<std::size_t>(v) * W;
      const double base_inv = ia + ic * y;
      for (int u = u0; u <= u1; ++u) {
        const auto inv = static_cast<float>(base_inv + ib * cam.pixel_x(u));
        if (inv > row[u]) row[u] = inv;
      }
    }
  }

  out.width = W;
  out.height = H;
  out.data.resize(inv_buffer.size());
  const auto near_f = static_cast<float>(cam.near_clip), far_f = static_cast<float>(cam.far_clip);
  for (std::size_t k = 0; k < inv_buffer.size(); ++k) {
    const float inv = inv_buffer[k];
    out.data[k] = inv > 0.0f ? std::clamp(1.0f / inv, near_f, far_f) : far_f;
  }
}

inline DepthImage render_depth(const CameraModel& cam, const BaseState& base, const DepthScene& scene) {
  DepthImage img;
  std::vector<float> buffer;
  render_depth(cam, base, scene, img, buffer);
  return img;
}

inline DepthImage render_depth(const CameraModel& cam, const BaseState& base, const LayeredHeightField& field) {
  return render_depth(cam, base, build_depth_scene(field));
}

/// Binary PGM, 16-bit big-endian samples in millimetres.
inline void save_pgm(const DepthImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (float d : img.data) {
    const auto mm = static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 0L, 65535L));
    const char bytes[2] = {static_cast<char>(mm >> 8), static_cast<char>(mm & 0xFF)};
    out.write(bytes, 2);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Pose sensor

struct PoseNoise {
  double sigma_pos = 0.0;  // metres, per axis
  double sigma_rot = 0.0;  // radians, per axis (small-angle)
};

struct PoseEstimate {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

inline PoseEstimate sense_pose(const BaseState& base, const PoseNoise& noise, Rng& rng) {
  PoseEstimate est{base.position, base.orientation};
  if (noise.sigma_pos > 0.0) {
    for (int k = 0; k < 3; ++k) est.position[k] += rng.normal(0.0, noise.sigma_pos);
  }
  if (noise.sigma_rot > 0.0) {
    const Eigen::Vector3d w(rng.normal(0.0, noise.sigma_rot), rng.normal(0.0, noise.sigma_rot),
                            rng.normal(0.0, noise.sigma_rot));
    const double angle = w.norm();
    if (angle > 0.0) est.orientation = est.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
  }
  est.orientation.normalize();
  return est;
}

inline PoseEstimate sense_pose(const BaseState& base, const PoseNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  return sense_pose(base, noise, rng);
}

// ---------------------------------------------------------------------------
// Observations

/// Student: depth image, pose (x y z, qw qx qy qz), previous action.
struct StudentObservation {
  DepthImage depth;
  std::array<double, 7> pose{};
  JointVector last_action{};
};

inline constexpr std::size_t kProprioSize = 67;

/// Teacher: height patch relative to the ground under the robot, then
/// proprioception in this order: joint angles 18, joint velocities 18,
/// position 3, quaternion (w x y z) 4, linear velocity 3, angular velocity 3,
/// previous action 18.
struct TeacherObservation {
  HeightPatch patch;
  std::array<double, kProprioSize> proprio{};
};

inline std::array<double, 7> pack_pose(const PoseEstimate& p) {
  return {p.position.x(), p.position.y(), p.position.z(), p.orientation.w(), p.orientation.x(), p.orientation.y(),
          p.orientation.z()};
}

inline TeacherObservation assemble_teacher(const LayeredHeightField& field, const RobotGeometry& g,
                                           const JointState& joints, const BaseState& base,
                                           const JointVector& last_action, const TaskSensing& sensing) {
  TeacherObservation obs;
  const PlanarPose planar{base.position.x(), base.position.y(), base.yaw};
  obs.patch = extract_patch(field, planar, sensing.patch, sensing.layer, g.body_half_length);
  const double ground = sample_floor(field, base.position.x(), base.position.y());
  for (double& v : obs.patch.values) v -= ground;
  std::size_t k = 0;
  for (double a : joints.angles) obs.proprio[k++] = a;
  for (double a : joints.velocities) obs.proprio[k++] = a;
  for (int i = 0; i < 3; ++i) obs.proprio[k++] = base.position[i];
  obs.proprio[k++] = base.orientation.w();
  obs.proprio[k++] = base.orientation.x();
  obs.proprio[k++] = base.orientation.y();
  obs.proprio[k++] = base.orientation.z();
  for (int i = 0; i < 3; ++i) obs.proprio[k++] = base.linear_velocity[i];
  for (int i = 0; i < 3; ++i) obs.proprio[k++] = base.angular_velocity[i];
  for (double a : last_action) obs.proprio[k++] = a;
  return obs;
}

inline StudentObservation assemble_student(const CameraModel& cam, const DepthScene* scene, const BaseState& base,
                                           const PoseEstimate& pose, const JointVector& last_action) {
  StudentObservation obs;
  if (scene) {
    obs.depth = render_depth(cam, base, *scene);
  } else {
    obs.depth.width = cam.width;
    obs.depth.height = cam.height;
  }
  obs.pose = pack_pose(pose);
  obs.last_action = last_action;
  return obs;
}

}  // namespace hexsim
