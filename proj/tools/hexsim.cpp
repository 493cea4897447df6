// hexsim command-line tool: terrain generation, rollouts, gait optimization, server.
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "hexsim/hexsim.hpp"

namespace {

using namespace hexsim;

constexpr int kExitOk = 0;
constexpr int kExitTaskFailed = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string task = "stairs";
  int level = 0;
  int total_levels = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::string reward_file;
};

Task to_task(const std::string& name) {
  const auto t = parse_task(name);
  if (!t) throw UsageError("unknown task '" + name + "'");
  return *t;
}

CurriculumLevel to_level(const Common& c) {
  CurriculumLevel lvl{c.level, c.total_levels};
  lvl.validate();
  return lvl;
}

std::optional<RewardConfig> reward_override(const Common& c) {
  if (c.reward_file.empty()) return std::nullopt;
  return load_reward_config(KeyValueFile::load(c.reward_file));
}

void print_summary(std::ostream& os, Task task, const CurriculumLevel& lvl, std::uint64_t seed,
                   const TerrainSpec& spec, const GeneratedTerrain& t) {
  const auto& f = t.field;
  os << "task " << task_name(task) << " level " << lvl.level << "/" << lvl.total_levels << " seed " << seed << "\n";
  os << "grid " << f.rows() << " x " << f.cols() << " cells, cell " << f.cell_size() << " m, length "
     << t.layout.length << " m\n";
  if (const auto* s = std::get_if<StairParams>(&spec)) {
    os << "riser " << s->riser << " m, tread " << s->tread << " m, steps " << s->step_count << "\n";
  } else if (const auto* o = std::get_if<ObstacleTerrain>(&spec)) {
    os << "density " << o->density << " /m^2, obstacles " << t.layout.obstacles.size() << "\n";
  } else if (const auto* u = std::get_if<TunnelParams>(&spec)) {
    os << "clearance " << u->clearance << " m, slab " << t.layout.slabs.front().first << " .. "
       << t.layout.slabs.front().second << " m\n";
  } else if (const auto* j = std::get_if<JoistParams>(&spec)) {
    os << "joist spacing " << j->spacing << " m, height " << j->height << " m, count " << t.layout.joist_x.size()
       << "\n";
  }
}

int cmd_gen_terrain(const Common& c) {
  if (c.out.empty()) throw UsageError("gen-terrain needs --out");
  const Task task = to_task(c.task);
  const auto lvl = to_level(c);
  const TerrainSpec spec = terrain_for_level(task, lvl, c.seed);
  const auto terrain = generate_terrain(spec, c.seed);
  save_hxm(terrain.field, c.out);
  print_summary(std::cout, task, lvl, c.seed, spec, terrain);
  return kExitOk;
}

struct RolloutOptions {
  std::string policy = "tripod";
  std::string params_file;
  int steps = 1000;
  std::string trace;
  std::string depth_dir;
  int depth_every = 10;
  double clearance = 0.0;  // squeeze only; 0 keeps the curriculum value
};

std::unique_ptr<Policy> make_policy(const RolloutOptions& o, std::uint64_t seed) {
  if (o.policy == "tripod") return std::make_unique<TripodPolicy>(walking_gait());
  if (o.policy == "crouch-tripod") return std::make_unique<CrouchTripodPolicy>();
  if (o.policy == "random") return std::make_unique<RandomPolicy>(derive_seed(seed, 0x9A9Du));
  if (o.policy == "params-file") {
    if (o.params_file.empty()) throw UsageError("--policy params-file needs --params");
    return std::make_unique<TripodPolicy>(load_gait(KeyValueFile::load(o.params_file)));
  }
  throw UsageError("unknown policy '" + o.policy + "'");
}

int cmd_rollout(const Common& c, const RolloutOptions& o) {
  EpisodeConfig cfg;
  cfg.task = to_task(c.task);
  cfg.level = to_level(c);
  cfg.seed = c.seed;
  cfg.max_steps = o.steps;
  cfg.reward = reward_override(c);
  if (o.clearance > 0.0) {
    if (cfg.task != Task::squeeze) throw UsageError("--clearance applies to the squeeze task only");
    auto tunnel = tunnel_params_for_level(cfg.level, c.seed);
    tunnel.clearance = o.clearance;
    cfg.terrain = tunnel;
  }
  auto policy = make_policy(o, c.seed);

  std::ofstream trace;
  if (!o.trace.empty()) {
    trace.open(o.trace, std::ios::binary);
    if (!trace) throw UsageError("cannot write " + o.trace);
    write_trace_header(trace);
  }
  if (!o.depth_dir.empty()) std::filesystem::create_directories(o.depth_dir);

  Env env;
  int ceiling_hits = 0;
  double min_b = std::numeric_limits<double>::infinity();
  auto dump_depth = [&](int step) {
    if (o.depth_dir.empty() || step % std::max(1, o.depth_every) != 0) return;
    char name[32];
    std::snprintf(name, sizeof name, "depth_%06d.pgm", step);
    save_pgm(env.render(), (std::filesystem::path(o.depth_dir) / name).string());
  };
  StepResult first = env.reset(cfg);
  if (trace) write_trace_row(trace, env, first);
  dump_depth(0);
  const auto summary = run_episode(env, cfg, *policy, [&](const StepResult& r) {
    if (trace) write_trace_row(trace, env, r);
    if (r.info.ceiling_collision) ++ceiling_hits;
    min_b = std::min(min_b, r.info.base_height);
    dump_depth(r.info.step);
  });

  std::cout << "steps " << summary.steps << ", return " << summary.total_return << ", distance "
            << summary.final_info.distance << " m, min b " << min_b << " m\n";
  std::cout << "stairs completed " << summary.final_info.stairs_completed << ", ceiling collision steps "
            << ceiling_hits << ", done " << done_reason_name(summary.reason) << "\n";
  return summary.reason == DoneReason::task_complete ? kExitOk : kExitTaskFailed;
}

struct TrainOptions {
  int budget = 2000;
  bool task_terrain = false;
  int episodes = 3;
  int episode_steps = 150;
};

int cmd_train(const Common& c, const TrainOptions& o) {
  if (o.budget < 1) throw UsageError("--budget must be >= 1");
  if (c.out.empty()) throw UsageError("train needs --out");
  OptimizerConfig cfg;
  cfg.task = to_task(c.task);
  cfg.reward = reward_override(c);
  cfg.budget = o.budget;
  cfg.seed = c.seed;
  cfg.episodes = o.episodes;
  cfg.episode_steps = o.episode_steps;
  if (o.task_terrain) cfg.terrain = terrain_for_level(cfg.task, to_level(c), c.seed);

  const auto result = optimize(GaitParams{}, cfg, [](const OptimizerRecord& r) {
    if (r.generation % 25 == 0) {
      std::cerr << "gen " << r.generation << " evals " << r.evaluations << " best " << r.best << " mean " << r.mean
                << "\n";
    }
  });

  const std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  save_gait(result.best).save((dir / "best_params.txt").string());
  std::ofstream hist(dir / "history.csv", std::ios::binary);
  if (!hist) throw UsageError("cannot write " + (dir / "history.csv").string());
  write_history_csv(hist, result.history);
  std::cout << "initial return " << result.initial_return << "\nbest return " << result.best_return << "\n";
  return kExitOk;
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const std::string& host, int port) {
  Server server(ServerConfig{host, static_cast<std::uint16_t>(port)});
  server.start();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << host << ":" << server.port() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  std::cout << "server stopped" << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hexapod locomotion environment engine"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file; command-line flags override it");

  Common c;
  const std::vector<std::string> tasks{"joist", "stairs", "avoidance", "squeeze"};
  app.add_option("--task", c.task, "joist | stairs | avoidance | squeeze")->check(CLI::IsMember(tasks));
  app.add_option("--level", c.level, "curriculum level")->check(CLI::NonNegativeNumber);
  app.add_option("--total-levels", c.total_levels, "number of curriculum levels")->check(CLI::PositiveNumber);
  app.add_option("--seed", c.seed, "seed");
  app.add_option("--out", c.out, "output path");
  app.add_option("--reward", c.reward_file, "reward weights file (key = value)");

  auto* gen = app.add_subcommand("gen-terrain", "write a terrain as .hxm and print its summary");

  RolloutOptions ro;
  auto* roll = app.add_subcommand("rollout", "run one episode and write a trace");
  roll->add_option("--policy", ro.policy, "tripod | crouch-tripod | random | params-file")
      ->check(CLI::IsMember({"tripod", "crouch-tripod", "random", "params-file"}));
  roll->add_option("--params", ro.params_file, "gait parameter file for --policy params-file");
  roll->add_option("--steps", ro.steps, "step limit")->check(CLI::PositiveNumber);
  roll->add_option("--trace", ro.trace, "trace CSV path");
  roll->add_option("--depth-dir", ro.depth_dir, "directory for PGM depth frames");
  roll->add_option("--depth-every", ro.depth_every, "dump every N steps")->check(CLI::PositiveNumber);
  roll->add_option("--clearance", ro.clearance, "squeeze: fixed tunnel clearance [m]")->check(CLI::PositiveNumber);

  TrainOptions to;
  auto* train = app.add_subcommand("train", "optimize tripod gait parameters");
  train->add_option("--budget", to.budget, "evaluations")->check(CLI::PositiveNumber);
  train->add_option("--episodes", to.episodes, "episodes per evaluation")->check(CLI::PositiveNumber);
  train->add_option("--episode-steps", to.episode_steps, "steps per episode")->check(CLI::PositiveNumber);
  train->add_flag("--task-terrain", to.task_terrain, "train on the task's curriculum terrain instead of flat ground");

  std::string host = "127.0.0.1";
  int port = proto::kDefaultPort;
  auto* serve = app.add_subcommand("serve", "run the environment server");
  serve->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "bind address");
  // --batch is carried by CONFIGURE; accepted here so shared config files parse
  std::uint32_t batch = 1;
  serve->add_option("--batch", batch, "default batch size (informational)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_terrain(c);
    if (*roll) return cmd_rollout(c, ro);
    if (*train) return cmd_train(c, to);
    if (*serve) return cmd_serve(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
