#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hexsim/physics.hpp"
#include "hexsim/reward.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/robot.hpp"
#include "hexsim/sensing.hpp"
#include "hexsim/task.hpp"
#include "hexsim/terrain.hpp"

namespace hexsim {

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

enum class DoneReason : std::uint8_t { none = 0, timeout = 1, fell_over = 2, out_of_bounds = 3, task_complete = 4 };

constexpr std::string_view done_reason_name(DoneReason r) {
  switch (r) {
    case DoneReason::none: return "";
    case DoneReason::timeout: return "timeout";
    case DoneReason::fell_over: return "fell_over";
    case DoneReason::out_of_bounds: return "out_of_bounds";
    case DoneReason::task_complete: return "task_complete";
  }
  return "";
}

struct EpisodeConfig {
  Task task = Task::stairs;
  CurriculumLevel level{};
  std::uint64_t seed = 0;
  int max_steps = 1000;
  double tilt_limit = 60.0 * kDeg;
  double oob_margin = 0.1;
  double dt = 0.05;

  std::optional<TerrainSpec> terrain;  // replaces the curriculum terrain when set
  CurriculumSettings curriculum{};
  bool render_depth = false;
  PoseNoise pose_noise{};
  double soft_limit_fraction = 0.9;  // joint-limit reward bounds as a fraction of the servo range
  RobotGeometry geometry = RobotGeometry::default_profile();
  PhysicsConfig physics{};
  std::optional<RewardConfig> reward;  // defaults to the task's shipped weights

  void validate() const {
    if (max_steps < 1) throw TerrainError("max_steps must be >= 1");
    if (!(dt > 0.0)) throw TerrainError("dt must be positive");
    if (!(tilt_limit > 0.0)) throw TerrainError("tilt limit must be positive");
    if (!(soft_limit_fraction > 0.0 && soft_limit_fraction <= 1.0)) throw TerrainError("bad soft limit fraction");
    level.validate();
    geometry.validate();
  }
};

struct StepInfo {
  int step = 0;
  double distance = 0.0;  // base x travelled since reset
  double base_height = 0.0;  // b: base z minus the floor directly beneath
  int stairs_completed = 0;
  bool collision = false;
  bool ceiling_collision = false;
  SupportState support = SupportState::supported;
};

struct StepResult {
  TeacherObservation teacher;
  StudentObservation student;
  RewardBreakdown reward;
  bool done = false;
  DoneReason reason = DoneReason::none;
  StepInfo info;
};

/// One simulated episode: terrain, robot state and the bookkeeping rewards need.
class Env {
 public:
  Env() = default;
  explicit Env(const EpisodeConfig& config) { reset(config); }

  StepResult reset(const EpisodeConfig& config) {
    config.validate();
    config_ = config;
    const TerrainSpec spec = config.terrain ? *config.terrain : terrain_for_level(config.task, config.level, config.seed,
                                                                                  config.curriculum);
    terrain_ = std::make_shared<const GeneratedTerrain>(generate_terrain(spec, config.seed));
    scene_.reset();
    if (config.render_depth) scene_ = std::make_shared<const DepthScene>(build_depth_scene(terrain_->field));
    reward_ = config.reward ? *config.reward : shipped_reward_config(config.task);
    sensing_ = task_sensing(config.task);
    camera_ = CameraModel::for_task(config.task, config.geometry);
    noise_rng_ = Rng(derive_seed(config.seed, 0xA11CEu));

    const auto& g = config_.geometry;
    const double x0 = terrain_->layout.spawn_front_x - g.body_half_length;
    auto [joints, base] = reset_pose(g, x0, 0.0, 0.0, sample_floor(terrain_->field, x0, 0.0));
    auto [settled, contacts] = resolve_contacts(g, joints, base, terrain_->field, config_.physics);
    joints_ = joints;
    base_ = settled;
    contacts_ = contacts;
    last_action_ = joints.angles;
    prev_force_ = contacts.force;
    x_start_ = base_.position.x();
    y_start_ = base_.position.y();
    for (int k = 0; k < kJointCount; ++k) {
      q_max_[k] = config_.soft_limit_fraction * g.joint_limit;
      q_min_[k] = -q_max_[k];
    }
    step_ = 0;
    done_ = false;

    StepResult r;
    observe(r);
    r.info = make_info();
    return r;
  }

  /// Applies one action (18 joint targets, radians). Order: servo, contact
  /// resolution, base advance, sensors, reward, termination.
  StepResult step(const JointVector& action) {
    if (!terrain_) throw UsageError("step before reset");
    if (done_) throw UsageError("step on a finished episode; call reset");
    const auto& g = config_.geometry;
    const double dt = config_.dt;

    JointVector applied{};
    for (int k = 0; k < kJointCount; ++k) {
      const double a = std::isfinite(action[k]) ? action[k] : last_action_[k];
      applied[k] = std::clamp(a, -g.joint_limit, g.joint_limit);
    }
    joints_ = servo_step(g, joints_, applied, dt);
    auto [resolved, contacts] = resolve_contacts(g, joints_, base_, terrain_->field, config_.physics);
    base_ = advance(g, resolved, joints_, contacts, dt, config_.physics);
    contacts_ = contacts;
    ++step_;

    StepResult r;
    observe(r);
    r.info = make_info();

    RewardInputs in;
    const double cy = std::cos(base_.yaw), sy = std::sin(base_.yaw);
    in.vx_world = base_.linear_velocity.x();
    in.vy_body = -sy * base_.linear_velocity.x() + cy * base_.linear_velocity.y();
    in.heading = base_.yaw;
    in.yaw_rate = base_.angular_velocity.z();
    in.force = contacts_.force;
    in.prev_force = prev_force_;
    in.illegal_contact = contacts_.any_illegal();
    in.action = applied;
    in.prev_action = last_action_;
    in.torque = torque_proxy(g, joints_);
    in.joint_velocity = joints_.velocities;
    in.prev_joint_velocity = joints_.prev_velocities;
    in.dt = dt;
    in.q = joints_.angles;
    in.q_min = q_min_;
    in.q_max = q_max_;
    in.foot_height = foot_heights();
    in.y = base_.position.y();
    in.y_start = y_start_;
    in.patch = &r.teacher.patch;
    in.b = r.info.base_height;
    r.reward = compose(reward_, in);

    prev_force_ = contacts_.force;
    last_action_ = applied;
    // the observation carries the action just applied
    const std::size_t off = kProprioSize - kJointCount;
    std::copy(applied.begin(), applied.end(), r.teacher.proprio.begin() + static_cast<std::ptrdiff_t>(off));
    r.student.last_action = applied;

    r.reason = termination();
    r.done = r.reason != DoneReason::none;
    done_ = r.done;
    return r;
  }

  const EpisodeConfig& config() const { return config_; }
  const GeneratedTerrain& terrain() const { return *terrain_; }
  const JointState& joints() const { return joints_; }
  const BaseState& base() const { return base_; }
  const ContactReport& contacts() const { return contacts_; }
  const CameraModel& camera() const { return camera_; }
  const RewardConfig& reward_config() const { return reward_; }
  int steps() const { return step_; }
  bool done() const { return done_; }

  double base_height() const {
    return base_.position.z() - sample_floor(terrain_->field, base_.position.x(), base_.position.y());
  }

  /// Renders the current view, even when per-step rendering is off.
  DepthImage render() const {
    if (scene_) return render_depth(camera_, base_, *scene_);
    return render_depth(camera_, base_, terrain_->field);
  }

 private:
  void observe(StepResult& r) {
    const auto& g = config_.geometry;
    r.teacher = assemble_teacher(terrain_->field, g, joints_, base_, last_action_, sensing_);
    const PoseEstimate pose = sense_pose(base_, config_.pose_noise, noise_rng_);
    r.student = assemble_student(camera_, scene_.get(), base_, pose, last_action_);
  }

  StepInfo make_info() const {
    StepInfo info;
    info.step = step_;
    info.distance = base_.position.x() - x_start_;
    info.base_height = base_height();
    for (double rx : terrain_->layout.riser_x) {
      if (base_.position.x() > rx) ++info.stairs_completed;
    }
    info.collision = contacts_.any_illegal();
    info.ceiling_collision = contacts_.ceiling_collision();
    info.support = contacts_.state;
    return info;
  }

  FootVector foot_heights() const {
    const LegSet world = forward_kinematics(config_.geometry, joints_, base_);
    FootVector z{};
    for (int k = 0; k < kLegCount; ++k) {
      z[k] = world[k].foot.z() - sample_floor(terrain_->field, world[k].foot.x(), world[k].foot.y());
    }
    return z;
  }

  DoneReason termination() const {
    if (std::abs(base_.roll) > config_.tilt_limit || std::abs(base_.pitch) > config_.tilt_limit) {
      return DoneReason::fell_over;
    }
    const auto& lay = terrain_->layout;
    const double m = config_.oob_margin;
    const auto& p = base_.position;
    if (p.x() < -m || p.x() > lay.length + m || std::abs(p.y()) > lay.corridor_halfwidth + m) {
      return DoneReason::out_of_bounds;
    }
    if (p.x() > lay.goal_x) return DoneReason::task_complete;
    if (step_ >= config_.max_steps) return DoneReason::timeout;
    return DoneReason::none;
  }

  EpisodeConfig config_;
  std::shared_ptr<const GeneratedTerrain> terrain_;
  std::shared_ptr<const DepthScene> scene_;
  RewardConfig reward_;
  TaskSensing sensing_;
  CameraModel camera_;
  Rng noise_rng_{0};

  JointState joints_;
  BaseState base_;
  ContactReport contacts_;
  JointVector last_action_{};
  FootVector prev_force_{};
  JointVector q_min_{}, q_max_{};
  double x_start_ = 0.0, y_start_ = 0.0;
  int step_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Curriculum

/// Promotes one level when the mean completion over the last `window` episodes
/// exceeds `threshold`. The window restarts after every promotion.
class Curriculum {
 public:
  Curriculum(int level = 0, int total_levels = 10, std::size_t window = 50, double threshold = 0.7)
      : level_(level), total_(total_levels), window_(window), threshold_(threshold) {
    CurriculumLevel{level, total_levels}.validate();
    if (window_ < 1) throw TerrainError("curriculum window must be >= 1");
  }

  int record(bool completed) {
    recent_.push_back(completed ? 1.0 : 0.0);
    if (recent_.size() > window_) recent_.pop_front();
    if (recent_.size() == window_) {
      const double mean = std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(window_);
      if (mean > threshold_ && level_ < total_) {
        ++level_;
        recent_.clear();
      }
    }
    return level_;
  }

  int level() const { return level_; }
  int total_levels() const { return total_; }
  CurriculumLevel current() const { return {level_, total_}; }

 private:
  int level_;
  int total_;
  std::size_t window_;
  double threshold_;
  std::deque<double> recent_;
};

/// Stateless form: next level given the most recent completions (oldest first).
inline int curriculum_advance(std::span<const double> completions, int level, int total_levels,
                              std::size_t window = 50, double threshold = 0.7) {
  if (completions.size() < window) return std::clamp(level, 0, total_levels);
  const auto tail = completions.subspan(completions.size() - window);
  const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(window);
  return std::clamp(mean > threshold ? level + 1 : level, 0, total_levels);
}

// ---------------------------------------------------------------------------
// Vectorized batch

struct BatchConfig {
  EpisodeConfig episode;           // task, level and physics shared by every environment
  std::size_t batch = 1;
  std::uint64_t seed = 0;          // batch seed; environment seeds derive from it
  std::vector<std::uint64_t> env_ids;  // identity of each slot; defaults to 0..batch-1
  unsigned threads = 1;
};

/// Batch of independent environments with Gym-style auto-reset: when an episode
/// ends, the returned reward/done/info are the terminal step's and the
/// observation is the first one of the next episode.
///
/// Slot s runs environment env_ids[s]; its k-th episode uses seed
/// derive_seed(derive_seed(batch seed, id), k). Results depend only on the id, so
/// permuting the ids permutes the results.
class VectorEnv {
 public:
  explicit VectorEnv(BatchConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.batch < 1) throw TerrainError("batch size must be >= 1");
    if (cfg_.env_ids.empty()) {
      cfg_.env_ids.resize(cfg_.batch);
      std::iota(cfg_.env_ids.begin(), cfg_.env_ids.end(), std::uint64_t{0});
    }
    if (cfg_.env_ids.size() != cfg_.batch) throw TerrainError("env_ids size must equal batch size");
    cfg_.episode.validate();
    envs_.resize(cfg_.batch);
    episode_.assign(cfg_.batch, 0);
    returns_.assign(cfg_.batch, 0.0);
  }

  std::size_t size() const { return cfg_.batch; }
  const BatchConfig& config() const { return cfg_; }
  const Env& env(std::size_t slot) const { return envs_[slot]; }

  std::uint64_t episode_seed(std::size_t slot) const {
    return derive_seed(derive_seed(cfg_.seed, cfg_.env_ids[slot]), episode_[slot]);
  }

  std::vector<StepResult> reset() {
    std::vector<StepResult> out(cfg_.batch);
    std::fill(episode_.begin(), episode_.end(), 0);
    std::fill(returns_.begin(), returns_.end(), 0.0);
    parallel([&](std::size_t s) { out[s] = envs_[s].reset(episode_config(s)); });
    return out;
  }

  std::vector<StepResult> step(std::span<const JointVector> actions) {
    if (actions.size() != cfg_.batch) throw UsageError("action batch size does not match environment batch");
    std::vector<StepResult> out(cfg_.batch);
    parallel([&](std::size_t s) {
      out[s] = envs_[s].step(actions[s]);
      returns_[s] += out[s].reward.total;
      if (out[s].done) {
        ++episode_[s];
        StepResult fresh = envs_[s].reset(episode_config(s));
        out[s].teacher = std::move(fresh.teacher);
        out[s].student = std::move(fresh.student);
      }
    });
    return out;
  }

  /// Sum of rewards per slot since the last reset() (across auto-resets).
  const std::vector<double>& cumulative_rewards() const { return returns_; }

 private:
  EpisodeConfig episode_config(std::size_t s) const {
    EpisodeConfig c = cfg_.episode;
    c.seed = episode_seed(s);
    return c;
  }

  template <class F>
  void parallel(F&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg_.threads, static_cast<unsigned>(cfg_.batch)));
    if (workers == 1) {
      for (std::size_t s = 0; s < cfg_.batch; ++s) fn(s);
      return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < cfg_.batch; s += workers) fn(s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BatchConfig cfg_;
  std::vector<Env> envs_;
  std::vector<std::uint64_t> episode_;
  std::vector<double> returns_;
};

// ---------------------------------------------------------------------------
// Rollout trace

inline void write_trace_header(std::ostream& os) {
  os << "step,x,y,z,roll,pitch,yaw,b,stairs_completed,collision,ceiling_collision";
  for (auto n : kTermNames) os << ',' << n;
  os << ",total,done_reason\n";
}

inline void write_trace_row(std::ostream& os, const Env& env, const StepResult& r) {
  const auto& b = env.base();
  const auto old = os.precision(10);
  os << r.info.step << ',' << b.position.x() << ',' << b.position.y() << ',' << b.position.z() << ',' << b.roll << ','
     << b.pitch << ',' << b.yaw << ',' << r.info.base_height << ',' << r.info.stairs_completed << ','
     << int(r.info.collision) << ',' << int(r.info.ceiling_collision);
  for (double w : r.reward.weighted) os << ',' << w;
  os << ',' << r.reward.total << ',' << done_reason_name(r.reason) << '\n';
  os.precision(old);
}

}  // namespace hexsim
