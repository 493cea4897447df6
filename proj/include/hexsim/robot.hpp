#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hexsim/kv_config.hpp"

namespace hexsim {

inline constexpr int kLegCount = 6;
inline constexpr int kJointCount = 18;
inline constexpr double kDeg = std::numbers::pi / 180.0;
/// Hard servo range, +-120 degrees.
inline constexpr double kJointLimit = 120.0 * kDeg;

using JointVector = std::array<double, kJointCount>;
using FootVector = std::array<double, kLegCount>;

/// Leg order: left-front, left-middle, left-rear, right-front, right-middle, right-rear.
/// Joint index = 3 * leg + {0: coxa, 1: femur, 2: tibia}.
enum class Leg : int { lf = 0, lm, lr, rf, rm, rr };

inline constexpr std::array<const char*, kLegCount> kLegNames{"lf", "lm", "lr", "rf", "rm", "rr"};

constexpr bool is_left(int leg) { return leg < 3; }

struct LegMount {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // base frame
  double yaw = 0.0;
};

/// Kinematic profile of the hexapod.
///
/// The base frame sits at the top-centre of the body collision box (the highest
/// point of the robot, camera payload included), x forward, y left, z up. The box
/// spans z in [-flat_height, 0], so base height above the floor equals the robot's
/// overall height and a robot lying on its belly sits at flat_height.
///
/// Leg chain: coxa yaws about the mount's vertical axis; femur pitches up from the
/// horizontal; the tibia folds down relative to the femur. With all joints at zero
/// a leg points straight out along its mount yaw.
struct RobotGeometry {
  double body_half_length = 0.13;
  double body_half_width = 0.09;
  std::array<LegMount, kLegCount> mounts{};
  double coxa_length = 0.045;
  double femur_length = 0.09;
  double tibia_length = 0.14;
  double standing_height = 0.37;
  double flat_height = 0.2875;

  JointVector reset_angles{};
  double max_servo_speed = 4.0;  // rad/s
  double servo_kp = 10.0;
  double torque_max = 5.0;
  double mass = 2.5;  // kg
  double joint_limit = kJointLimit;

  Eigen::Vector3d camera_offset{0.11, 0.0, -0.03};

  double weight() const { return mass * 9.81; }

  /// Foot position relative to its mount for given joint angles, in the mount's
  /// radial/vertical plane: {radial reach, height}.
  std::pair<double, double> leg_plane(double femur, double tibia) const {
    const double radial = coxa_length + femur_length * std::cos(femur) + tibia_length * std::cos(femur - tibia);
    const double height = femur_length * std::sin(femur) + tibia_length * std::sin(femur - tibia);
    return {radial, height};
  }

  static RobotGeometry default_profile() {
    RobotGeometry g;
    constexpr double reset_coxa = 0.0, reset_femur = 0.3, reset_tibia = 1.3;
    for (int leg = 0; leg < kLegCount; ++leg) {
      g.reset_angles[3 * leg + 0] = reset_coxa;
      g.reset_angles[3 * leg + 1] = reset_femur;
      g.reset_angles[3 * leg + 2] = reset_tibia;
    }
    // mounts sit low on the chassis; z follows from the standing height
    const double drop = g.leg_plane(reset_femur, reset_tibia).second;
    const double mz = -g.standing_height - drop;
    const double fx = 0.11, fy = 0.07, my = 0.09;
    g.mounts = {{
        {{fx, fy, mz}, 45.0 * kDeg},
        {{0.0, my, mz}, 90.0 * kDeg},
        {{-fx, fy, mz}, 135.0 * kDeg},
        {{fx, -fy, mz}, -45.0 * kDeg},
        {{0.0, -my, mz}, -90.0 * kDeg},
        {{-fx, -fy, mz}, -135.0 * kDeg},
    }};
    return g;
  }

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(body_half_length) || !positive(body_half_width) || !positive(coxa_length) ||
        !positive(femur_length) || !positive(tibia_length) || !positive(standing_height) || !positive(flat_height) ||
        !positive(max_servo_speed) || !positive(mass) || !positive(joint_limit)) {
      throw std::invalid_argument("robot geometry: lengths and servo constants must be positive");
    }
    for (double a : reset_angles) {
      if (std::abs(a) > joint_limit) throw std::invalid_argument("robot geometry: reset angle outside joint range");
    }
  }
};

struct JointState {
  JointVector angles{};
  JointVector velocities{};
  JointVector targets{};
  JointVector prev_velocities{};
};

/// Floating-base state. Roll/pitch/yaw (Z-Y-X) are canonical; the quaternion is
/// kept in sync by set_rpy().
struct BaseState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();   // world frame
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // (roll rate, pitch rate, yaw rate)

  double heading() const { return yaw; }

  void set_rpy(double r, double p, double y) {
    roll = r;
    pitch = p;
    yaw = y;
    orientation = Eigen::AngleAxisd(y, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(p, Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(r, Eigen::Vector3d::UnitX());
  }

  Eigen::Matrix3d rotation() const { return orientation.toRotationMatrix(); }
};

inline Eigen::Matrix3d rotation_rpy(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Eigen::Matrix3d m;
  m << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,  //
      sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,   //
      -sp, cp * sr, cp * cr;
  return m;
}

/// Joint origins and foot of one leg.
struct LegPoints {
  Eigen::Vector3d coxa = Eigen::Vector3d::Zero();   // coxa joint (mount)
  Eigen::Vector3d femur = Eigen::Vector3d::Zero();  // femur joint, end of coxa link
  Eigen::Vector3d tibia = Eigen::Vector3d::Zero();  // knee, end of femur link
  Eigen::Vector3d foot = Eigen::Vector3d::Zero();
  double yaw = 0.0;  // leg plane heading in the frame the points are expressed in
};

using LegSet = std::array<LegPoints, kLegCount>;

/// Serial-chain FK in the base frame.
inline LegSet leg_points_body(const RobotGeometry& g, const JointVector& angles) {
  LegSet out;
  for (int leg = 0; leg < kLegCount; ++leg) {
    const auto& mount = g.mounts[leg];
    const double coxa = angles[3 * leg], femur = angles[3 * leg + 1], tibia = angles[3 * leg + 2];
    const double heading = mount.yaw + coxa;
    const Eigen::Vector3d radial(std::cos(heading), std::sin(heading), 0.0);
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    LegPoints& p = out[leg];
    p.yaw = heading;
    p.coxa = mount.position;
    p.femur = p.coxa + g.coxa_length * radial;
    p.tibia = p.femur + g.femur_length * (std::cos(femur) * radial + std::sin(femur) * up);
    p.foot = p.tibia + g.tibia_length * (std::cos(femur - tibia) * radial + std::sin(femur - tibia) * up);
  }
  return out;
}

inline LegSet transform_legs(const LegSet& body, const Eigen::Matrix3d& rot, const Eigen::Vector3d& pos) {
  LegSet out;
  for (int leg = 0; leg < kLegCount; ++leg) {
    out[leg].coxa = pos + rot * body[leg].coxa;
    out[leg].femur = pos + rot * body[leg].femur;
    out[leg].tibia = pos + rot * body[leg].tibia;
    out[leg].foot = pos + rot * body[leg].foot;
    out[leg].yaw = body[leg].yaw;
  }
  return out;
}

/// World-frame joint origins and feet.
inline LegSet forward_kinematics(const RobotGeometry& g, const JointState& joints, const BaseState& base) {
  return transform_legs(leg_points_body(g, joints.angles), rotation_rpy(base.roll, base.pitch, base.yaw),
                        base.position);
}

/// Resting configuration: reset joint angles, base at standing height above
/// `floor_height`, zero velocities.
inline std::pair<JointState, BaseState> reset_pose(const RobotGeometry& g, double x = 0.0, double y = 0.0,
                                                   double yaw = 0.0, double floor_height = 0.0) {
  JointState j;
  j.angles = g.reset_angles;
  j.targets = g.reset_angles;
  BaseState b;
  b.position = {x, y, floor_height + g.standing_height};
  b.set_rpy(0.0, 0.0, yaw);
  return {j, b};
}

/// Rate-limited position servo. Targets are clamped to the joint range and each
/// angle moves at most max_servo_speed * dt toward its target.
inline JointState servo_step(const RobotGeometry& g, const JointState& joints, const JointVector& commanded, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("servo_step: dt must be positive");
  JointState next;
  const double max_delta = g.max_servo_speed * dt;
  for (int k = 0; k < kJointCount; ++k) {
    const double cmd = std::isfinite(commanded[k]) ? commanded[k] : joints.targets[k];
    const double target = std::clamp(cmd, -g.joint_limit, g.joint_limit);
    const double delta = std::clamp(target - joints.angles[k], -max_delta, max_delta);
    next.targets[k] = target;
    next.angles[k] = std::clamp(joints.angles[k] + delta, -g.joint_limit, g.joint_limit);
    next.velocities[k] = (next.angles[k] - joints.angles[k]) / dt;
    next.prev_velocities[k] = joints.velocities[k];
  }
  return next;
}

/// Proportional torque estimate kp * (target - angle), saturated at torque_max.
inline JointVector torque_proxy(const RobotGeometry& g, const JointState& joints) {
  JointVector tau{};
  for (int k = 0; k < kJointCount; ++k) {
    tau[k] = std::clamp(g.servo_kp * (joints.targets[k] - joints.angles[k]), -g.torque_max, g.torque_max);
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Geometry profile files (key = value)

inline RobotGeometry load_geometry(const KeyValueFile& kv) {
  RobotGeometry g = RobotGeometry::default_profile();
  g.body_half_length = kv.get_double("body_half_length", g.body_half_length);
  g.body_half_width = kv.get_double("body_half_width", g.body_half_width);
  g.coxa_length = kv.get_double("coxa_length", g.coxa_length);
  g.femur_length = kv.get_double("femur_length", g.femur_length);
  g.tibia_length = kv.get_double("tibia_length", g.tibia_length);
  g.standing_height = kv.get_double("standing_height", g.standing_height);
  g.flat_height = kv.get_double("flat_height", g.flat_height);
  g.max_servo_speed = kv.get_double("max_servo_speed", g.max_servo_speed);
  g.servo_kp = kv.get_double("servo_kp", g.servo_kp);
  g.torque_max = kv.get_double("torque_max", g.torque_max);
  g.mass = kv.get_double("mass", g.mass);
  for (int axis = 0; axis < 3; ++axis) {
    g.camera_offset[axis] = kv.get_double(std::string("camera_") + "xyz"[axis], g.camera_offset[axis]);
  }
  const double femur = kv.get_double("reset_femur", g.reset_angles[1]);
  const double tibia = kv.get_double("reset_tibia", g.reset_angles[2]);
  const double coxa = kv.get_double("reset_coxa", g.reset_angles[0]);
  for (int leg = 0; leg < kLegCount; ++leg) {
    g.reset_angles[3 * leg] = coxa;
    g.reset_angles[3 * leg + 1] = femur;
    g.reset_angles[3 * leg + 2] = tibia;
  }
  const double default_mz = -g.standing_height - g.leg_plane(femur, tibia).second;
  for (int leg = 0; leg < kLegCount; ++leg) {
    const std::string p = std::string("mount_") + kLegNames[leg] + "_";
    auto& m = g.mounts[leg];
    m.position.x() = kv.get_double(p + "x", m.position.x());
    m.position.y() = kv.get_double(p + "y", m.position.y());
    m.position.z() = kv.get_double(p + "z", default_mz);
    m.yaw = kv.get_double(p + "yaw_deg", m.yaw / kDeg) * kDeg;
  }
  g.validate();
  return g;
}

inline KeyValueFile save_geometry(const RobotGeometry& g) {
  KeyValueFile kv;
  kv.set("body_half_length", g.body_half_length);
  kv.set("body_half_width", g.body_half_width);
  kv.set("coxa_length", g.coxa_length);
  kv.set("femur_length", g.femur_length);
  kv.set("tibia_length", g.tibia_length);
  kv.set("standing_height", g.standing_height);
  kv.set("flat_height", g.flat_height);
  kv.set("max_servo_speed", g.max_servo_speed);
  kv.set("servo_kp", g.servo_kp);
  kv.set("torque_max", g.torque_max);
  kv.set("mass", g.mass);
  kv.set("camera_x", g.camera_offset.x());
  kv.set("camera_y", g.camera_offset.y());
  kv.set("camera_z", g.camera_offset.z());
  kv.set("reset_coxa", g.reset_angles[0]);
  kv.set("reset_femur", g.reset_angles[1]);
  kv.set("reset_tibia", g.reset_angles[2]);
  for (int leg = 0; leg < kLegCount; ++leg) {
    const std::string p = std::string("mount_") + kLegNames[leg] + "_";
    kv.set(p + "x", g.mounts[leg].position.x());
    kv.set(p + "y", g.mounts[leg].position.y());
    kv.set(p + "z", g.mounts[leg].position.z());
    kv.set(p + "yaw_deg", g.mounts[leg].yaw / kDeg);
  }
  return kv;
}

}  // namespace hexsim
