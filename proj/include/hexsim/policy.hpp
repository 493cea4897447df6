#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexsim/env.hpp"
#include "hexsim/kv_config.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/robot.hpp"

namespace hexsim {

/// Parametric tripod gait. Amplitudes and the crouch offset are radians.
struct GaitParams {
  double frequency = 0.5;  // Hz
  double coxa_amplitude = 0.1;
  double femur_amplitude = 0.3;
  double tibia_amplitude = 0.2;
  double crouch = 0.0;     // added to femur and tibia; lowers the body
  double turn_bias = 0.0;  // added to left coxa amplitude, taken from right
  std::array<double, kLegCount> phase{0.0, 0.5, 0.0, 0.5, 0.0, 0.5};  // cycles; LF LR RM vs LM RF RR

  void validate(const RobotGeometry& g = RobotGeometry::default_profile()) const {
    if (!(frequency > 0.0) || !std::isfinite(frequency)) throw std::invalid_argument("gait frequency must be > 0");
    const double lim = g.joint_limit;
    for (int leg = 0; leg < kLegCount; ++leg) {
      const double amp = coxa_amplitude + std::abs(turn_bias);
      const double f0 = g.reset_angles[3 * leg + 1] + crouch, t0 = g.reset_angles[3 * leg + 2] + crouch;
      if (std::abs(g.reset_angles[3 * leg]) + amp > lim || std::abs(f0) > lim || std::abs(f0 + femur_amplitude) > lim ||
          std::abs(t0) > lim || std::abs(t0 - tibia_amplitude) > lim) {
        throw std::invalid_argument("gait parameters leave the joint range");
      }
    }
  }
};

/// Joint targets at time t. Each leg runs phase psi = 2 pi (f t + phase): it swings
/// (lifted) for sin psi > 0 and sweeps backward on the ground otherwise.
inline JointVector tripod_gait(const GaitParams& p, double t,
                               const RobotGeometry& g = RobotGeometry::default_profile()) {
  JointVector q{};
  for (int leg = 0; leg < kLegCount; ++leg) {
    const double psi = 2.0 * std::numbers::pi * (p.frequency * t + p.phase[leg]);
    const double fwd = -std::cos(psi);  // -1 rear, +1 front of the stride
    const double lift = std::max(0.0, std::sin(psi));
    // moving a left foot forward turns its coxa clockwise, a right foot counter-clockwise
    const bool left = is_left(leg);
    const double amp = p.coxa_amplitude + (left ? p.turn_bias : -p.turn_bias);
    q[3 * leg] = g.reset_angles[3 * leg] + (left ? -amp : amp) * fwd;
    q[3 * leg + 1] = g.reset_angles[3 * leg + 1] + p.crouch + p.femur_amplitude * lift;
    q[3 * leg + 2] = g.reset_angles[3 * leg + 2] + p.crouch - p.tibia_amplitude * lift;
  }
  return q;
}

inline GaitParams load_gait(const KeyValueFile& kv) {
  GaitParams p;
  p.frequency = kv.get_double("frequency", p.frequency);
  p.coxa_amplitude = kv.get_double("coxa_amplitude", p.coxa_amplitude);
  p.femur_amplitude = kv.get_double("femur_amplitude", p.femur_amplitude);
  p.tibia_amplitude = kv.get_double("tibia_amplitude", p.tibia_amplitude);
  p.crouch = kv.get_double("crouch", p.crouch);
  p.turn_bias = kv.get_double("turn_bias", p.turn_bias);
  for (int leg = 0; leg < kLegCount; ++leg) {
    p.phase[leg] = kv.get_double(std::string("phase_") + kLegNames[leg], p.phase[leg]);
  }
  p.validate();
  return p;
}

inline KeyValueFile save_gait(const GaitParams& p) {
  KeyValueFile kv;
  kv.set("frequency", p.frequency);
  kv.set("coxa_amplitude", p.coxa_amplitude);
  kv.set("femur_amplitude", p.femur_amplitude);
  kv.set("tibia_amplitude", p.tibia_amplitude);
  kv.set("crouch", p.crouch);
  kv.set("turn_bias", p.turn_bias);
  for (int leg = 0; leg < kLegCount; ++leg) kv.set(std::string("phase_") + kLegNames[leg], p.phase[leg]);
  return kv;
}

/// Gait used by the scripted policies: a brisk, long-stride tripod.
inline GaitParams walking_gait() {
  GaitParams p;
  p.frequency = 1.0;
  p.coxa_amplitude = 0.35;
  p.femur_amplitude = 0.35;
  p.tibia_amplitude = 0.25;
  return p;
}

// ---------------------------------------------------------------------------
// Policies

class Policy {
 public:
  virtual ~Policy() = default;
  /// `obs` is the latest StepResult (after reset or the previous step).
  virtual JointVector act(const StepResult& obs, double t) = 0;
};

class TripodPolicy : public Policy {
 public:
  explicit TripodPolicy(GaitParams p, double t0 = 0.0) : p_(p), t0_(t0) { p_.validate(); }
  JointVector act(const StepResult&, double t) override { return tripod_gait(p_, t + t0_); }

 private:
  GaitParams p_;
  double t0_;
};

/// Tripod that crouches when the squeeze-composite patch shows a low ceiling
/// close ahead and stands up again once the body has cleared it.
///
/// A ceiling is "low" when it sits less than `margin` above the standing height.
/// The patch starts at the robot front, so the policy remembers the last base x
/// at which it saw one and stays down for a body length (plus margin) past it.
class CrouchTripodPolicy : public Policy {
 public:
  explicit CrouchTripodPolicy(GaitParams stand = walking_gait(), double crouch = 0.5, double lookahead = 0.35,
                              const RobotGeometry& g = RobotGeometry::default_profile())
      : stand_(stand), crouch_(crouch), lookahead_(lookahead), standing_height_(g.standing_height),
        body_length_(2.0 * g.body_half_length) {
    stand_.validate(g);
    GaitParams low = stand_;
    low.crouch = crouch_;
    low.validate(g);
  }

  JointVector act(const StepResult& obs, double t) override {
    const auto& patch = obs.teacher.patch;
    const double x = obs.teacher.proprio[36];
    const double cell = task_sensing(Task::squeeze).patch.cell_size;
    bool low_ceiling = false;
    for (std::size_t r = 0; r < patch.rows; ++r) {
      const double ahead = (static_cast<double>(patch.rows - r) - 0.5) * cell;
      if (ahead > lookahead_) continue;
      for (std::size_t c = 0; c < patch.cols; ++c) {
        const double h = patch.at(r, c);
        if (h > 0.5 * standing_height_ && h < standing_height_ + margin_) low_ceiling = true;
      }
    }
    if (low_ceiling) last_seen_x_ = x;
    crouched_ = low_ceiling || (last_seen_x_ && x - *last_seen_x_ < body_length_ + margin_ + 0.1);
    GaitParams p = stand_;
    p.crouch = crouched_ ? crouch_ : 0.0;
    return tripod_gait(p, t);
  }

  bool crouched() const { return crouched_; }

 private:
  GaitParams stand_;
  double crouch_;
  double lookahead_;
  double standing_height_;
  double body_length_;
  double margin_ = 0.02;
  std::optional<double> last_seen_x_;
  bool crouched_ = false;
};

/// Uniform joint targets over [-range, range], seeded.
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed, double range = kJointLimit) : rng_(seed), range_(range) {}
  JointVector act(const StepResult&, double) override {
    JointVector q{};
    for (double& v : q) v = rng_.uniform(-range_, range_);
    return q;
  }

 private:
  Rng rng_;
  double range_;
};

struct RolloutSummary {
  double total_return = 0.0;
  int steps = 0;
  DoneReason reason = DoneReason::none;
  StepInfo final_info;
};

/// Runs one episode. `on_step` sees every step result.
inline RolloutSummary run_episode(Env& env, const EpisodeConfig& cfg, Policy& policy,
                                  const std::function<void(const StepResult&)>& on_step = {}) {
  StepResult obs = env.reset(cfg);
  RolloutSummary s;
  while (true) {
    const double t = static_cast<double>(env.steps()) * cfg.dt;
    obs = env.step(policy.act(obs, t));
    s.total_return += obs.reward.total;
    ++s.steps;
    if (on_step) on_step(obs);
    if (obs.done) {
      s.reason = obs.reason;
      s.final_info = obs.info;
      return s;
    }
  }
}

// ---------------------------------------------------------------------------
// Evolution strategy

/// Search box for the optimized gait parameters; the search runs in [0, 1]^6.
struct GaitBounds {
  std::array<double, 6> lo{0.2, 0.0, 0.0, 0.0, 0.0, -0.2};
  std::array<double, 6> hi{2.0, 0.5, 0.6, 0.6, 0.9, 0.2};
};

inline std::array<double, 6> gait_to_vector(const GaitParams& p) {
  return {p.frequency, p.coxa_amplitude, p.femur_amplitude, p.tibia_amplitude, p.crouch, p.turn_bias};
}

inline GaitParams vector_to_gait(const std::array<double, 6>& v, GaitParams base = {}) {
  base.frequency = v[0];
  base.coxa_amplitude = v[1];
  base.femur_amplitude = v[2];
  base.tibia_amplitude = v[3];
  base.crouch = v[4];
  base.turn_bias = v[5];
  return base;
}

struct OptimizerConfig {
  Task task = Task::stairs;
  std::optional<RewardConfig> reward;      // defaults to the task's weights
  std::optional<TerrainSpec> terrain = FlatTerrain{};
  int budget = 2000;                       // evaluations, the initial point included
  int episodes = 3;                        // per evaluation
  int episode_steps = 150;
  int population = 16;
  double initial_sigma = 0.15;             // in normalized units
  std::uint64_t seed = 0;
  GaitBounds bounds{};
};

struct OptimizerRecord {
  int generation = 0;
  int evaluations = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct OptimizerResult {
  GaitParams best;
  double best_return = 0.0;
  double initial_return = 0.0;
  std::vector<OptimizerRecord> history;
};

/// Mean return over the configured episodes. Episodes differ in the gait's
/// starting phase, drawn from fixed per-episode seeds so every candidate sees the
/// same conditions.
inline double evaluate_gait(const GaitParams& p, const OptimizerConfig& cfg) {
  Env env;
  double total = 0.0;
  for (int e = 0; e < cfg.episodes; ++e) {
    EpisodeConfig ec;
    ec.task = cfg.task;
    ec.seed = derive_seed(cfg.seed, 0xE0000u + static_cast<std::uint64_t>(e));
    ec.max_steps = cfg.episode_steps;
    ec.terrain = cfg.terrain;
    ec.reward = cfg.reward;
    Rng phase_rng(ec.seed);
    TripodPolicy policy(p, phase_rng.uniform() / p.frequency);
    total += run_episode(env, ec, policy).total_return;
  }
  return total / cfg.episodes;
}

/// (mu/mu_w, lambda)-ES with cumulative step-size adaptation over the normalized
/// gait box. history[g].best is the best return seen up to generation g.
inline OptimizerResult optimize(const GaitParams& init, const OptimizerConfig& cfg,
                                const std::function<void(const OptimizerRecord&)>& progress = {}) {
  if (cfg.budget < 1) throw std::invalid_argument("optimizer budget must be >= 1");
  if (cfg.population < 2) throw std::invalid_argument("population must be >= 2");
  constexpr int n = 6;
  const auto& B = cfg.bounds;
  auto to_unit = [&](const std::array<double, 6>& v) {
    std::array<double, 6> u{};
    for (int k = 0; k < n; ++k) u[k] = std::clamp((v[k] - B.lo[k]) / (B.hi[k] - B.lo[k]), 0.0, 1.0);
    return u;
  };
  auto from_unit = [&](const std::array<double, 6>& u) {
    std::array<double, 6> v{};
    for (int k = 0; k < n; ++k) v[k] = B.lo[k] + std::clamp(u[k], 0.0, 1.0) * (B.hi[k] - B.lo[k]);
    return vector_to_gait(v, init);
  };
  auto fitness = [&](const GaitParams& p) {
    try {
      p.validate();
    } catch (const std::invalid_argument&) {
      return -std::numeric_limits<double>::infinity();
    }
    return evaluate_gait(p, cfg);
  };

  OptimizerResult res;
  res.initial_return = fitness(init);
  res.best = init;
  res.best_return = res.initial_return;
  int evals = 1;
  res.history.push_back({0, evals, res.best_return, res.initial_return});
  if (progress) progress(res.history.back());

  const int lambda = cfg.population;
  const int mu = lambda / 2;
  std::vector<double> w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= wsum;
  double w2 = 0.0;
  for (double x : w) w2 += x * x;
  const double mu_eff = 1.0 / w2;
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double chi_n = std::sqrt(static_cast<double>(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  Rng rng(derive_seed(cfg.seed, 0xE5u));
  std::array<double, 6> mean = to_unit(gait_to_vector(init));
  std::array<double, 6> path{};
  double sigma = cfg.initial_sigma;

  struct Candidate {
    std::array<double, 6> z;
    double f;
  };
  for (int gen = 1; evals + lambda <= cfg.budget; ++gen) {
    std::vector<Candidate> pop(lambda);
    double fsum = 0.0;
    for (auto& c : pop) {
      std::array<double, 6> u{};
      for (int k = 0; k < n; ++k) {
        c.z[k] = rng.normal();
        u[k] = mean[k] + sigma * c.z[k];
      }
      const GaitParams p = from_unit(u);
      c.f = fitness(p);
      ++evals;
      fsum += std::isfinite(c.f) ? c.f : 0.0;
      if (c.f > res.best_return) {
        res.best_return = c.f;
        res.best = p;
      }
    }
    std::stable_sort(pop.begin(), pop.end(), [](const Candidate& a, const Candidate& b) { return a.f > b.f; });
    std::array<double, 6> zmean{};
    for (int i = 0; i < mu; ++i) {
      for (int k = 0; k < n; ++k) zmean[k] += w[i] * pop[i].z[k];
    }
    double norm = 0.0;
    for (int k = 0; k < n; ++k) {
      mean[k] = std::clamp(mean[k] + sigma * zmean[k], 0.0, 1.0);
      path[k] = (1.0 - c_sigma) * path[k] + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * zmean[k];
      norm += path[k] * path[k];
    }
    sigma *= std::exp((c_sigma / d_sigma) * (std::sqrt(norm) / chi_n - 1.0));
    sigma = std::clamp(sigma, 1e-4, 0.5);
    res.history.push_back({gen, evals, res.best_return, fsum / lambda});
    if (progress) progress(res.history.back());
  }
  return res;
}

inline void write_history_csv(std::ostream& os, const std::vector<OptimizerRecord>& h) {
  const auto old = os.precision(17);
  os << "generation,evaluations,best,mean\n";
  for (const auto& r : h) os << r.generation << ',' << r.evaluations << ',' << r.best << ',' << r.mean << '\n';
  os.precision(old);
}

}  // namespace hexsim
