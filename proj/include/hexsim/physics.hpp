#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "hexsim/heightmap.hpp"
#include "hexsim/robot.hpp"

namespace hexsim {

struct PhysicsConfig {
  double contact_tolerance = 0.005;      // a foot this close to the floor counts as contacting
  double penetration_threshold = 0.002;  // collision volumes may sink this far before it is illegal
  double settle_tolerance = 0.025;       // base higher than its support pose by more than this is airborne
  double gravity = 9.81;
  int refine_iterations = 4;
};

enum class SupportState : std::uint8_t {
  supported = 0,  // three or more feet carry the body
  resting = 1,    // the belly is on the ground
  falling = 2,    // airborne above the support pose
  tipping = 3,    // centre of mass outside every support triangle
};

struct ContactReport {
  std::array<bool, kLegCount> foot_contact{};
  FootVector force{};  // newtons
  int contact_count = 0;
  SupportState state = SupportState::supported;

  // illegal contacts
  bool floor_coxa = false, floor_femur = false, floor_base = false;
  bool ceiling_coxa = false, ceiling_femur = false, ceiling_base = false;
  double floor_penetration = 0.0;    // deepest floor penetration of a non-foot point [m]
  double ceiling_penetration = 0.0;  // deepest ceiling penetration [m]

  double support_z = 0.0;          // base height the support pose asks for
  Eigen::Vector2d tip_direction = Eigen::Vector2d::Zero();  // yaw frame, unit, valid while tipping

  bool unsupported() const { return contact_count < 3; }
  bool floor_collision() const { return floor_coxa || floor_femur || floor_base; }
  bool ceiling_collision() const { return ceiling_coxa || ceiling_femur || ceiling_base; }
  bool any_illegal() const { return floor_collision() || ceiling_collision(); }
};

namespace detail {

struct SupportPlane {
  double c = 0.0;  // height at the base origin
  double a = 0.0;  // slope along yaw-frame x
  double b = 0.0;  // slope along yaw-frame y
};

/// Lowest plane lying on or above every point (x_k, y_k, h_k), evaluated at the
/// origin. This is the upper convex hull facet over the origin, found by checking
/// every triangle that contains the origin. nullopt when no triangle does.
inline std::optional<SupportPlane> lowest_support_plane(const std::array<Eigen::Vector2d, kLegCount>& xy,
                                                        const FootVector& h) {
  std::optional<SupportPlane> best;
  constexpr double eps = 1e-12;
  for (int i = 0; i < kLegCount; ++i) {
    for (int j = i + 1; j < kLegCount; ++j) {
      for (int k = j + 1; k < kLegCount; ++k) {
        const Eigen::Vector2d e1 = xy[j] - xy[i], e2 = xy[k] - xy[i];
        const double det = e1.x() * e2.y() - e1.y() * e2.x();
        if (std::abs(det) < 1e-10) continue;
        // barycentric coordinates of the origin
        const Eigen::Vector2d o = -xy[i];
        const double u = (o.x() * e2.y() - o.y() * e2.x()) / det;
        const double v = (e1.x() * o.y() - e1.y() * o.x()) / det;
        if (u < -eps || v < -eps || u + v > 1.0 + eps) continue;
        // plane h = c + a x + b y through the three points
        const double dh1 = h[j] - h[i], dh2 = h[k] - h[i];
        const double a = (dh1 * e2.y() - dh2 * e1.y()) / det;
        const double b = (e1.x() * dh2 - e2.x() * dh1) / det;
        const double c = h[i] - a * xy[i].x() - b * xy[i].y();
        bool above = true;
        for (int m = 0; m < kLegCount && above; ++m) {
          if (h[m] > c + a * xy[m].x() + b * xy[m].y() + 1e-9) above = false;
        }
        if (!above) continue;
        if (!best || c < best->c) best = SupportPlane{c, a, b};
      }
    }
  }
  return best;
}

inline constexpr std::array<double, 3> kGrid3{-1.0, 0.0, 1.0};

/// Belly (z = -flat_height) or top (z = 0) face sample points in the base frame.
inline std::array<Eigen::Vector3d, 9> box_face(const RobotGeometry& g, double z) {
  std::array<Eigen::Vector3d, 9> pts;
  int n = 0;
  for (double sx : kGrid3) {
    for (double sy : kGrid3) pts[n++] = {sx * g.body_half_length, sy * g.body_half_width, z};
  }
  return pts;
}

}  // namespace detail

/// Places the base on its supporting feet and reports contacts.
///
/// The support pose depends only on the base's planar position, yaw and the joint
/// angles, never on its current height or tilt, so a static stance is a fixed point.
/// Tipping is the exception: its tilt is integrated state and is carried through.
inline std::pair<BaseState, ContactReport> resolve_contacts(const RobotGeometry& g, const JointState& joints,
                                                            const BaseState& base, const LayeredHeightField& field,
                                                            const PhysicsConfig& cfg = {}) {
  const LegSet body = leg_points_body(g, joints.angles);
  const double cy = std::cos(base.yaw), sy = std::sin(base.yaw);
  auto world_xy = [&](const Eigen::Vector3d& p) -> Eigen::Vector2d {
    return {base.position.x() + cy * p.x() - sy * p.y(), base.position.y() + sy * p.x() + cy * p.y()};
  };

  // base height each foot would need in a level pose to touch the floor
  std::array<Eigen::Vector2d, kLegCount> foot_xy;
  FootVector z_req{};
  for (int k = 0; k < kLegCount; ++k) {
    foot_xy[k] = body[k].foot.head<2>();
    const Eigen::Vector2d w = world_xy(body[k].foot);
    z_req[k] = sample_floor(field, w.x(), w.y()) - body[k].foot.z();
  }
  const auto belly = detail::box_face(g, -g.flat_height);
  double z_rest = -std::numeric_limits<double>::infinity();
  for (const auto& p : belly) {
    const Eigen::Vector2d w = world_xy(p);
    z_rest = std::max(z_rest, sample_floor(field, w.x(), w.y()) + g.flat_height);
  }
  const double z_req_max = *std::max_element(z_req.begin(), z_req.end());

  BaseState out = base;
  ContactReport rep;
  const auto plane = detail::lowest_support_plane(foot_xy, z_req);

  double roll = 0.0, pitch = 0.0, z = 0.0;
  if (plane && plane->c >= z_rest) {
    rep.state = SupportState::supported;
    pitch = -std::atan(plane->a);
    roll = std::atan(plane->b);
    z = plane->c;
    std::array<int, kLegCount> active{};
    int n = 0;
    for (int k = 0; k < kLegCount; ++k) {
      const double on_plane = plane->c + plane->a * foot_xy[k].x() + plane->b * foot_xy[k].y();
      if (on_plane - z_req[k] <= cfg.contact_tolerance) active[n++] = k;
    }
    // Gauss-Newton on (z, roll, pitch) so the active feet sit on the floor under
    // the exact rotation. The floor slope is left out of the Jacobian.
    for (int it = 0; it < cfg.refine_iterations; ++it) {
      const Eigen::Matrix3d rot = rotation_rpy(roll, pitch, base.yaw);
      const double cr = std::cos(roll), sr = std::sin(roll), cp = std::cos(pitch), sp = std::sin(pitch);
      Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
      Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
      for (int m = 0; m < n; ++m) {
        const Eigen::Vector3d& f = body[active[m]].foot;
        const Eigen::Vector3d w = Eigen::Vector3d(base.position.x(), base.position.y(), z) + rot * f;
        const double r = w.z() - sample_floor(field, w.x(), w.y());
        const Eigen::Vector3d jac(1.0, cp * (cr * f.y() - sr * f.z()), -cp * f.x() - sp * (sr * f.y() + cr * f.z()));
        jtj += jac * jac.transpose();
        jtr += jac * r;
      }
      const Eigen::Vector3d step = jtj.ldlt().solve(jtr);
      if (!step.allFinite()) break;
      z -= step[0];
      roll -= step[1];
      pitch -= step[2];
    }
    out.angular_velocity.x() = 0.0;
    out.angular_velocity.y() = 0.0;
  } else if (z_rest >= z_req_max - cfg.contact_tolerance || plane) {
    rep.state = SupportState::resting;
    z = z_rest;
    out.angular_velocity.x() = 0.0;
    out.angular_velocity.y() = 0.0;
  } else {
    // no support triangle under the centre of mass: pivot on the current tilt
    rep.state = SupportState::tipping;
    roll = base.roll;
    pitch = base.pitch;
    const Eigen::Matrix3d rot = rotation_rpy(roll, pitch, base.yaw);
    z = -std::numeric_limits<double>::infinity();
    auto lift_to = [&](const Eigen::Vector3d& p) {
      const Eigen::Vector3d w = rot * p;
      z = std::max(z, sample_floor(field, base.position.x() + w.x(), base.position.y() + w.y()) - w.z());
    };
    for (const auto& leg : body) lift_to(leg.foot);
    for (const auto& p : belly) lift_to(p);
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    int n = 0;
    for (int k = 0; k < kLegCount; ++k) {
      if (z_req[k] >= z_req_max - cfg.contact_tolerance) {
        centroid += foot_xy[k];
        ++n;
      }
    }
    centroid /= static_cast<double>(std::max(n, 1));
    rep.tip_direction = centroid.norm() > 1e-9 ? Eigen::Vector2d(-centroid / centroid.norm()) : Eigen::Vector2d(1, 0);
  }

  rep.support_z = z;
  if (base.position.z() > z + cfg.settle_tolerance) {
    rep.state = SupportState::falling;
    z = base.position.z();
  } else {
    out.linear_velocity.z() = 0.0;
  }
  out.position.z() = z;
  out.set_rpy(roll, pitch, base.yaw);

  // contacts and illegal penetrations in the final pose
  const Eigen::Matrix3d rot = out.rotation();
  const LegSet world = transform_legs(body, rot, out.position);
  for (int k = 0; k < kLegCount; ++k) {
    const Eigen::Vector3d& f = world[k].foot;
    if (f.z() - sample_floor(field, f.x(), f.y()) <= cfg.contact_tolerance) {
      rep.foot_contact[k] = true;
      ++rep.contact_count;
    }
  }
  auto probe = [&](const Eigen::Vector3d& p, bool& floor_flag, bool& ceiling_flag) {
    const double pen = sample_floor(field, p.x(), p.y()) - p.z();
    rep.floor_penetration = std::max(rep.floor_penetration, pen);
    if (pen > cfg.penetration_threshold) floor_flag = true;
    if (const auto ceil = sample_ceiling(field, p.x(), p.y())) {
      const double up = p.z() - *ceil;
      rep.ceiling_penetration = std::max(rep.ceiling_penetration, up);
      if (up > cfg.penetration_threshold) ceiling_flag = true;
    }
  };
  for (const auto& leg : world) {
    for (double t : {0.0, 0.5, 1.0}) probe(leg.coxa + t * (leg.femur - leg.coxa), rep.floor_coxa, rep.ceiling_coxa);
    for (double t : {1.0 / 3.0, 2.0 / 3.0, 1.0}) {
      probe(leg.femur + t * (leg.tibia - leg.femur), rep.floor_femur, rep.ceiling_femur);
    }
  }
  for (const auto& p : belly) probe(out.position + rot * p, rep.floor_base, rep.ceiling_base);
  for (const auto& p : detail::box_face(g, 0.0)) probe(out.position + rot * p, rep.floor_base, rep.ceiling_base);

  if (rep.state != SupportState::falling && rep.contact_count > 0) {
    const double share = g.weight() / static_cast<double>(rep.contact_count);
    for (int k = 0; k < kLegCount; ++k) rep.force[k] = rep.foot_contact[k] ? share : 0.0;
  }
  return {out, rep};
}

/// Moves the base for one step.
///
/// Supported: the stance feet stay put on the ground, so the body moves by the
/// rigid planar motion (translation + yaw) that best cancels their displacement
/// relative to the body over the step. Falling: semi-implicit free fall down to the
/// support height. Tipping: roll/pitch accelerate at g / standing_height away
/// from the supporting feet.
inline BaseState advance(const RobotGeometry& g, const BaseState& base, const JointState& joints,
                         const ContactReport& contacts, double dt, const PhysicsConfig& cfg = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
  BaseState out = base;
  out.linear_velocity.x() = 0.0;
  out.linear_velocity.y() = 0.0;
  out.angular_velocity.z() = 0.0;

  switch (contacts.state) {
    case SupportState::falling: {
      out.linear_velocity.z() = base.linear_velocity.z() - cfg.gravity * dt;
      double z = base.position.z() + out.linear_velocity.z() * dt;
      if (z <= contacts.support_z) {
        z = contacts.support_z;
        out.linear_velocity.z() = 0.0;
      }
      out.position.z() = z;
      return out;
    }
    case SupportState::tipping: {
      const double alpha = cfg.gravity / g.standing_height;
      // side +x going down is nose-down pitch; side +y going down is negative roll
      out.angular_velocity.y() = base.angular_velocity.y() + alpha * dt * contacts.tip_direction.x();
      out.angular_velocity.x() = base.angular_velocity.x() - alpha * dt * contacts.tip_direction.y();
      out.set_rpy(base.roll + out.angular_velocity.x() * dt, base.pitch + out.angular_velocity.y() * dt, base.yaw);
      return out;
    }
    case SupportState::resting:
    case SupportState::supported: break;
  }
  if (contacts.contact_count == 0) return out;

  // foot displacement over the step in the levelled (yaw-only) frame
  JointVector prev{};
  for (int k = 0; k < kJointCount; ++k) prev[k] = joints.angles[k] - joints.velocities[k] * dt;
  const LegSet now = leg_points_body(g, joints.angles);
  const LegSet before = leg_points_body(g, prev);
  const Eigen::Matrix3d tilt = rotation_rpy(base.roll, base.pitch, 0.0);

  std::array<Eigen::Vector2d, kLegCount> p{}, d{};
  Eigen::Vector2d p_mean = Eigen::Vector2d::Zero(), d_mean = Eigen::Vector2d::Zero();
  int n = 0;
  for (int k = 0; k < kLegCount; ++k) {
    if (!contacts.foot_contact[k]) continue;
    p[n] = (tilt * now[k].foot).head<2>();
    d[n] = (tilt * (now[k].foot - before[k].foot)).head<2>();
    p_mean += p[n];
    d_mean += d[n];
    ++n;
  }
  p_mean /= n;
  d_mean /= n;
  double num = 0.0, den = 0.0;
  for (int m = 0; m < n; ++m) {
    const Eigen::Vector2d pc = p[m] - p_mean, dc = d[m] - d_mean;
    num += pc.x() * dc.y() - pc.y() * dc.x();
    den += pc.squaredNorm();
  }
  const double dyaw = den > 1e-12 ? -num / den : 0.0;
  // translation of the base origin, levelled frame: -d_mean - dyaw * z x p_mean
  const Eigen::Vector2d shift(-d_mean.x() + dyaw * p_mean.y(), -d_mean.y() - dyaw * p_mean.x());
  const double cy = std::cos(base.yaw), sy = std::sin(base.yaw);
  const Eigen::Vector2d world_shift(cy * shift.x() - sy * shift.y(), sy * shift.x() + cy * shift.y());
  out.position.x() += world_shift.x();
  out.position.y() += world_shift.y();
  out.linear_velocity.x() = world_shift.x() / dt;
  out.linear_velocity.y() = world_shift.y() / dt;
  out.angular_velocity.z() = dyaw / dt;
  out.set_rpy(base.roll, base.pitch, std::remainder(base.yaw + dyaw, 2.0 * std::numbers::pi));
  return out;
}

}  // namespace hexsim
