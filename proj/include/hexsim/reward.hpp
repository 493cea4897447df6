#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "hexsim/heightmap.hpp"
#include "hexsim/kv_config.hpp"
#include "hexsim/robot.hpp"
#include "hexsim/task.hpp"

namespace hexsim {

/// Reward terms, in the fixed accumulation order.
enum class Term : std::uint8_t {
  forward_velocity = 0,
  lateral_velocity,
  heading,
  yaw_rate,
  ground_impact,
  collision,
  action_rate,
  action_magnitude,
  torques,
  joint_acceleration,
  joint_limit,
  end_effector_height,
  global_y_deviation,
  obstacle_front,
  obstacle_above,
};

inline constexpr std::size_t kTermCount = 15;

inline constexpr std::array<std::string_view, kTermCount> kTermNames{
    "forward_velocity", "lateral_velocity", "heading",          "yaw_rate",
    "ground_impact",    "collision",        "action_rate",      "action_magnitude",
    "torques",          "joint_acceleration", "joint_limit",    "end_effector_height",
    "global_y_deviation", "obstacle_front", "obstacle_above"};

constexpr std::string_view term_name(Term t) { return kTermNames[static_cast<std::size_t>(t)]; }

inline std::optional<Term> parse_term(std::string_view name) {
  for (std::size_t k = 0; k < kTermCount; ++k) {
    if (kTermNames[k] == name) return static_cast<Term>(k);
  }
  return std::nullopt;
}

using TermArray = std::array<double, kTermCount>;

// ---------------------------------------------------------------------------
// Individual terms

inline double term_forward_velocity(double vx) { return std::clamp(vx, -0.4, 0.4); }
inline double term_lateral_velocity(double vy) { return vy * vy; }
inline double term_heading(double theta) { return theta * theta; }
inline double term_yaw_rate(double omega) { return omega * omega; }

template <std::size_t N>
double squared_distance(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

template <std::size_t N>
double squared_norm(const std::array<double, N>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double term_ground_impact(const FootVector& f, const FootVector& f_prev) { return squared_distance(f, f_prev); }
inline double term_action_rate(const JointVector& a, const JointVector& a_prev) { return squared_distance(a, a_prev); }
inline double term_action_magnitude(const JointVector& a) { return squared_norm(a); }
inline double term_torques(const JointVector& tau) { return squared_norm(tau); }

inline double term_joint_accel(const JointVector& qd, const JointVector& qd_prev, double dt) {
  double s = 0.0;
  for (std::size_t k = 0; k < kJointCount; ++k) {
    const double acc = (qd[k] - qd_prev[k]) / dt;
    s += acc * acc;
  }
  return s;
}

/// clip(q - q_min, max = 0) + clip(q - q_max, min = 0), summed over joints.
inline double term_joint_limit(const JointVector& q, const JointVector& q_min, const JointVector& q_max) {
  double s = 0.0;
  for (std::size_t k = 0; k < kJointCount; ++k) {
    s += std::min(q[k] - q_min[k], 0.0) + std::max(q[k] - q_max[k], 0.0);
  }
  return s;
}

inline double term_collision(bool illegal_contact) { return illegal_contact ? 1.0 : 0.0; }

/// Sum of per-foot |z|, z measured above the floor under each foot.
inline double term_end_effector_height(const FootVector& z) {
  double s = 0.0;
  for (double v : z) s += std::abs(v);
  return s;
}

inline double term_global_y_deviation(double y, double y_start) { return (y - y_start) * (y - y_start); }

// ---------------------------------------------------------------------------
// Height-map functionals. Row 0 is the far edge; both return unsigned values.

/// Lateral weight: 1 at both edges, 2 at the centre, linear between.
inline double lateral_weight(std::size_t j, std::size_t n) {
  if (n <= 1) return 1.0;
  const double span = static_cast<double>(n - 1);
  return 1.0 + (1.0 - std::abs(2.0 * static_cast<double>(j) - span) / span);
}

/// Forward ramp: 1 at the far row, 2 at the row nearest the robot.
inline double ramp_weight(std::size_t i, std::size_t m) {
  if (m <= 1) return 1.0;
  return 1.0 + static_cast<double>(i) / static_cast<double>(m - 1);
}

/// Weighted count of occupied cells (h > 0 relative to the ground under the robot).
inline double avoidance_functional(const HeightPatch& patch) {
  double total = 0.0;
  for (std::size_t i = 0; i < patch.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < patch.cols; ++j) {
      if (patch.at(i, j) > 0.0) row += lateral_weight(j, patch.cols);
    }
    total += row * ramp_weight(i, patch.rows);
  }
  return total;
}

/// h'' = 1 where the composite height clears the base (h - b > 0), else -2 |h - b|;
/// uniform lateral weight, forward ramp.
inline double squeeze_functional(const HeightPatch& patch, double b) {
  double total = 0.0;
  for (std::size_t i = 0; i < patch.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < patch.cols; ++j) {
      const double d = patch.at(i, j) - b;
      row += d > 0.0 ? 1.0 : -2.0 * std::abs(d);
    }
    total += row * ramp_weight(i, patch.rows);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Configuration

struct RewardConfig {
  std::optional<Task> task;
  TermArray weights{};

  double weight(Term t) const { return weights[static_cast<std::size_t>(t)]; }
  double& weight(Term t) { return weights[static_cast<std::size_t>(t)]; }

  RewardConfig scaled(double s) const {
    RewardConfig c = *this;
    for (double& w : c.weights) w *= s;
    return c;
  }
};

/// The shipped weight columns, one per task.
inline RewardConfig shipped_reward_config(Task task) {
  //                   fwd   lat   head  yaw   impact coll  a_rate a_mag  tau    q_acc  q_lim ee    y_dev obs_f obs_a
  static constexpr TermArray joist{100, -10, -30, -1, -0.1, -1, -0.5, -0.01, -0.001, -1e-5, -1, -0.1, 0, 0, 0};
  static constexpr TermArray stairs{100, -10, 0, 0, 0, 0, -0.5, 0, 0, -1e-5, -1, 0, -100, 0, 0};
  static constexpr TermArray avoidance{100, -10, 0, -1, 0, -3, -0.5, -0.01, -0.001, -1e-5, -1, 0, -1, -0.1, 0};
  static constexpr TermArray squeeze{100, -10, 0, -1, 0, -1, -0.5, -0.01, -0.01, -1e-5, -1, 0, -1, 0, -0.1};
  RewardConfig c;
  c.task = task;
  switch (task) {
    case Task::joist: c.weights = joist; break;
    case Task::stairs: c.weights = stairs; break;
    case Task::avoidance: c.weights = avoidance; break;
    case Task::squeeze: c.weights = squeeze; break;
  }
  return c;
}

/// Reads `term = weight` lines. An optional `task` key starts from that task's
/// shipped column; unknown keys are rejected.
inline RewardConfig load_reward_config(const KeyValueFile& kv) {
  RewardConfig c;
  if (kv.has("task")) {
    const auto t = parse_task(kv.get_string("task"));
    if (!t) throw ConfigError("unknown task '" + kv.get_string("task") + "'");
    c = shipped_reward_config(*t);
  }
  for (const auto& [key, value] : kv.entries()) {
    if (key == "task") continue;
    const auto term = parse_term(key);
    if (!term) throw ConfigError("unknown reward term '" + key + "'");
    c.weight(*term) = KeyValueFile::to_double(value, key);
  }
  return c;
}

inline KeyValueFile save_reward_config(const RewardConfig& c) {
  KeyValueFile kv;
  if (c.task) kv.set("task", std::string(task_name(*c.task)));
  for (std::size_t k = 0; k < kTermCount; ++k) kv.set(std::string(kTermNames[k]), c.weights[k]);
  return kv;
}

// ---------------------------------------------------------------------------
// Composition

/// Everything the terms read for one step.
struct RewardInputs {
  double vx_world = 0.0;
  double vy_body = 0.0;
  double heading = 0.0;
  double yaw_rate = 0.0;
  FootVector force{};
  FootVector prev_force{};
  bool illegal_contact = false;
  JointVector action{};
  JointVector prev_action{};
  JointVector torque{};
  JointVector joint_velocity{};
  JointVector prev_joint_velocity{};
  double dt = 0.05;
  JointVector q{};
  JointVector q_min{};
  JointVector q_max{};
  FootVector foot_height{};
  double y = 0.0;
  double y_start = 0.0;
  const HeightPatch* patch = nullptr;  // relative to the ground under the robot
  double b = 0.0;
};

struct RewardBreakdown {
  TermArray raw{};
  TermArray weighted{};
  std::array<bool, kTermCount> active{};
  double total = 0.0;
};

inline double evaluate_term(Term t, const RewardInputs& in) {
  switch (t) {
    case Term::forward_velocity: return term_forward_velocity(in.vx_world);
    case Term::lateral_velocity: return term_lateral_velocity(in.vy_body);
    case Term::heading: return term_heading(in.heading);
    case Term::yaw_rate: return term_yaw_rate(in.yaw_rate);
    case Term::ground_impact: return term_ground_impact(in.force, in.prev_force);
    case Term::collision: return term_collision(in.illegal_contact);
    case Term::action_rate: return term_action_rate(in.action, in.prev_action);
    case Term::action_magnitude: return term_action_magnitude(in.action);
    case Term::torques: return term_torques(in.torque);
    case Term::joint_acceleration: return term_joint_accel(in.joint_velocity, in.prev_joint_velocity, in.dt);
    case Term::joint_limit: return term_joint_limit(in.q, in.q_min, in.q_max);
    case Term::end_effector_height: return term_end_effector_height(in.foot_height);
    case Term::global_y_deviation: return term_global_y_deviation(in.y, in.y_start);
    case Term::obstacle_front: return in.patch ? avoidance_functional(*in.patch) : 0.0;
    case Term::obstacle_above: return in.patch ? squeeze_functional(*in.patch, in.b) : 0.0;
  }
  return 0.0;
}

/// Weighted sum over the nonzero-weight terms, accumulated in term order.
inline RewardBreakdown compose(const RewardConfig& config, const RewardInputs& in) {
  RewardBreakdown out;
  for (std::size_t k = 0; k < kTermCount; ++k) {
    const double w = config.weights[k];
    if (w == 0.0) continue;
    out.active[k] = true;
    out.raw[k] = evaluate_term(static_cast<Term>(k), in);
    out.weighted[k] = w * out.raw[k];
    out.total += out.weighted[k];
  }
  return out;
}

/// CSV header: step, one column per term (weighted), total.
inline std::string reward_csv_header() {
  std::string h = "step";
  for (auto n : kTermNames) (h += ',') += n;
  return h + ",total";
}

inline std::string reward_csv_row(std::size_t step, const RewardBreakdown& r) {
  std::ostringstream os;
  os.precision(17);
  os << step;
  for (double w : r.weighted) os << ',' << w;
  os << ',' << r.total;
  return os.str();
}

}  // namespace hexsim
