#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hexsim/heightmap.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/task.hpp"

namespace hexsim {

struct TerrainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CurriculumLevel {
  int level = 0;
  int total_levels = 10;

  void validate() const {
    if (total_levels < 1 || level < 0 || level > total_levels) {
      throw TerrainError("curriculum level must satisfy 0 <= level <= total_levels, total_levels >= 1");
    }
  }
  double fraction() const { return static_cast<double>(level) / static_cast<double>(total_levels); }
};

/// Grid shared by every generator. The field spans x in [0, length] and
/// y in [-width/2, width/2]; the robot travels along +x.
struct TerrainGrid {
  double cell_size = 0.02;
  double width = 2.0;
};

// ---------------------------------------------------------------------------
// Stairs

enum class StairDirection : std::uint8_t { up = 0, down = 1 };

struct StairParams {
  double riser = 0.045;
  double tread = 0.30;
  int step_count = 8;
  double tread_jitter_fraction = 0.2;
  std::optional<int> landing_interval;
  StairDirection direction = StairDirection::up;

  double approach_length = 1.5;
  double landing_depth = 1.0;
  double top_length = 2.0;

  void validate() const {
    if (!(riser >= 0.045 - 1e-12 && riser <= 0.18 + 1e-12)) throw TerrainError("riser outside [0.045, 0.18]");
    if (!(tread >= 0.18 - 1e-12 && tread <= 0.30 + 1e-12)) throw TerrainError("tread outside [0.18, 0.30]");
    if (step_count < 1) throw TerrainError("step_count must be >= 1");
    if (!(tread_jitter_fraction >= 0.0 && tread_jitter_fraction < 1.0)) throw TerrainError("bad tread jitter");
    if (landing_interval && *landing_interval < 1) throw TerrainError("landing interval must be >= 1");
    if (!(landing_depth >= 1.0)) throw TerrainError("landing platforms must be at least 1 m deep");
  }
};

/// Riser grows and tread shrinks linearly with the level. std::lerp is exact at both ends.
inline StairParams stair_params_for_level(const CurriculumLevel& lvl) {
  lvl.validate();
  StairParams p;
  const double t = lvl.fraction();
  p.riser = std::lerp(0.045, 0.18, t);
  p.tread = std::lerp(0.30, 0.18, t);
  return p;
}

// ---------------------------------------------------------------------------
// Obstacle field

enum class Footprint : std::uint8_t { box = 0, cylinder = 1, polygon = 2 };

struct ShapeSpec {
  Footprint footprint = Footprint::box;
  double size_min = 0.15;  // box side / cylinder radius / polygon circumradius
  double size_max = 0.35;
  double height_min = 0.15;
  double height_max = 0.6;
};

struct ObstacleFieldParams {
  std::vector<ShapeSpec> shape_set{
      {Footprint::box, 0.15, 0.40, 0.15, 0.6},
      {Footprint::cylinder, 0.08, 0.20, 0.15, 0.6},
      {Footprint::polygon, 0.10, 0.22, 0.15, 0.6},
  };
  double corridor_halfwidth = 1.5;
  double corridor_length = 10.0;
  double spawn_clear = 1.5;  // obstacle-free band at the corridor start
  double end_clear = 1.0;
  double min_spacing = 0.9;  // centre-to-centre

  void validate() const {
    if (shape_set.empty()) throw TerrainError("obstacle shape set is empty");
    for (const auto& s : shape_set) {
      if (!(s.size_min > 0.0 && s.size_max >= s.size_min && s.height_min > 0.0 && s.height_max >= s.height_min)) {
        throw TerrainError("obstacle size ranges must be positive");
      }
    }
    if (!(corridor_halfwidth > 0.0) || !(min_spacing >= 0.0) || !(spawn_clear >= 1.0) ||
        !(corridor_length > spawn_clear + end_clear)) {
      throw TerrainError("invalid obstacle corridor geometry");
    }
  }
  double placement_area() const { return (corridor_length - spawn_clear - end_clear) * 2.0 * corridor_halfwidth; }
};

/// Obstacle density at a curriculum level: (2 * L / T) * d_final.
/// With `cap` the result never exceeds d_final.
inline double obstacle_density_for_level(const CurriculumLevel& lvl, double density_final, bool cap = false) {
  lvl.validate();
  const double d = (2.0 * lvl.level / lvl.total_levels) * density_final;
  return cap ? std::min(d, density_final) : d;
}

struct Obstacle {
  Footprint footprint = Footprint::box;
  double x = 0.0;
  double y = 0.0;
  double size_a = 0.0;  // box: length, otherwise radius
  double size_b = 0.0;  // box: width
  double rotation = 0.0;
  int sides = 0;  // polygon only
  double height = 0.0;

  bool contains(double px, double py) const {
    const double dx = px - x;
    const double dy = py - y;
    switch (footprint) {
      case Footprint::cylinder: return dx * dx + dy * dy <= size_a * size_a;
      case Footprint::box: {
        const double c = std::cos(rotation), s = std::sin(rotation);
        const double lx = c * dx + s * dy;
        const double ly = -s * dx + c * dy;
        return std::abs(lx) <= 0.5 * size_a && std::abs(ly) <= 0.5 * size_b;
      }
      case Footprint::polygon: {
        // convex regular polygon: inside iff on the inner side of every edge
        const double apothem = size_a * std::cos(std::numbers::pi / sides);
        for (int k = 0; k < sides; ++k) {
          const double normal_angle = rotation + (2.0 * k + 1.0) * std::numbers::pi / sides;
          if (dx * std::cos(normal_angle) + dy * std::sin(normal_angle) > apothem) return false;
        }
        return true;
      }
    }
    return false;
  }

  double bounding_radius() const {
    return footprint == Footprint::box ? 0.5 * std::hypot(size_a, size_b) : size_a;
  }
};

// ---------------------------------------------------------------------------
// Tunnel (floating ceiling slabs)

struct TunnelParams {
  double clearance = 0.37;          // slab underside above the floor
  double tunnel_length = 1.291;     // forward extent of the (first) slab
  double obstacle_thickness = 0.05; // minimum forward extent of a slab (a rod or a board edge)
  double obstacle_width = 1.6;      // lateral extent
  double approach_distance = 1.0;   // corridor start to slab leading edge
  std::optional<double> second_gap;     // when set, a second slab follows after this gap
  double second_length = 0.3;
  double exit_length = 2.0;

  void validate() const {
    if (!(clearance > 0.0)) throw TerrainError("tunnel clearance must be positive");
    if (!(tunnel_length > 0.0)) throw TerrainError("tunnel length must be positive");
    if (!(obstacle_thickness > 0.0) || !(obstacle_width > 0.0)) throw TerrainError("bad obstacle dimensions");
    if (!(approach_distance >= 0.5)) throw TerrainError("approach distance must leave room to spawn");
    if (second_gap && (!(*second_gap > 0.0) || !(second_length > 0.0))) throw TerrainError("bad second slab");
  }
};

inline constexpr std::array<double, 4> kTunnelClearanceSchedule{0.37, 0.35, 0.33, 0.31};

/// Clearance steps through the schedule in four equal bands of the level range;
/// the top level always gets the lowest clearance.
inline double tunnel_clearance_for_level(const CurriculumLevel& lvl) {
  lvl.validate();
  const auto n = kTunnelClearanceSchedule.size();
  if (lvl.level == lvl.total_levels) return kTunnelClearanceSchedule[n - 1];
  const auto idx = std::min<std::size_t>(n - 1, static_cast<std::size_t>(lvl.level) * n /
                                                    static_cast<std::size_t>(lvl.total_levels + 1));
  return kTunnelClearanceSchedule[idx];
}

/// Ranges used for the level-independent tunnel randomization.
struct TunnelRandomization {
  double length_min = 0.05, length_max = 1.5;
  double thickness_min = 0.02, thickness_max = 0.10;
  double width_min = 1.0, width_max = 2.0;
  double approach_min = 0.5, approach_max = 2.0;
};

inline TunnelParams tunnel_params_for_level(const CurriculumLevel& lvl, std::uint64_t seed,
                                            const TunnelRandomization& r = {}) {
  TunnelParams p;
  p.clearance = tunnel_clearance_for_level(lvl);
  Rng rng(derive_seed(seed, 0x7u));
  p.tunnel_length = rng.uniform(r.length_min, r.length_max);
  p.obstacle_thickness = rng.uniform(r.thickness_min, r.thickness_max);
  p.obstacle_width = rng.uniform(r.width_min, r.width_max);
  p.approach_distance = rng.uniform(r.approach_min, r.approach_max);
  return p;
}

// ---------------------------------------------------------------------------
// Joists

struct JoistParams {
  double spacing = 0.4;
  double height = 0.04;
  double width = 0.04;
  double corridor_length = 8.0;
  double start_clear = 1.0;

  void validate() const {
    if (!(spacing > 0.0) || !(width > 0.0) || !(height >= 0.0) || !(width < spacing)) {
      throw TerrainError("joist dimensions must be positive with width < spacing");
    }
  }
};

// ---------------------------------------------------------------------------
// Generated terrain

/// Geometry facts the environment needs for spawning and completion checks.
struct TerrainLayout {
  double length = 0.0;              // corridor spans x in [0, length]
  double corridor_halfwidth = 1.0;  // centred on y = 0
  double spawn_front_x = 0.5;       // where the robot front is placed at reset
  double goal_x = 0.0;              // task complete once the base passes this x

  std::vector<double> riser_x;  // stairs: x of every riser, in travel order
  std::vector<double> treads;   // realised tread depths
  double stairs_end_x = 0.0;    // far edge of the last step

  std::vector<std::pair<double, double>> slabs;  // tunnel: ceiling bands [x0, x1]
  std::vector<Obstacle> obstacles;
  std::vector<double> joist_x;  // joist centre lines
};

struct GeneratedTerrain {
  LayeredHeightField field;
  TerrainLayout layout;
};

namespace detail {

/// Allocates a zero floor for a corridor of `length` metres.
inline void make_corridor(const TerrainGrid& grid, double length, std::vector<float>* floor_out, std::size_t* rows,
                          std::size_t* cols) {
  *cols = static_cast<std::size_t>(std::ceil(length / grid.cell_size - 1e-9));
  *rows = static_cast<std::size_t>(std::ceil(grid.width / grid.cell_size - 1e-9));
  floor_out->assign(*rows * *cols, 0.0f);
}

inline double cell_center_x(const TerrainGrid& grid, std::size_t j) { return (static_cast<double>(j) + 0.5) * grid.cell_size; }
inline double cell_center_y(const TerrainGrid& grid, std::size_t i) {
  return -0.5 * grid.width + (static_cast<double>(i) + 0.5) * grid.cell_size;
}

inline LayeredHeightField finish(const TerrainGrid& grid, std::size_t rows, std::size_t cols, std::vector<float> floor,
                                 std::optional<std::vector<float>> ceiling = std::nullopt) {
  return {rows, cols, grid.cell_size, 0.5 * grid.cell_size, -0.5 * grid.width + 0.5 * grid.cell_size,
          std::move(floor), std::move(ceiling)};
}

}  // namespace detail

inline GeneratedTerrain generate_flat(double length = 10.0, const TerrainGrid& grid = {}) {
  std::vector<float> floor;
  std::size_t rows = 0, cols = 0;
  detail::make_corridor(grid, length, &floor, &rows, &cols);
  TerrainLayout layout;
  layout.length = length;
  layout.corridor_halfwidth = 0.5 * grid.width;
  layout.spawn_front_x = 0.5;
  layout.goal_x = length - 1.0;
  return {detail::finish(grid, rows, cols, std::move(floor)), std::move(layout)};
}

/// Staircase: flat approach, `step_count` risers of exactly `riser`, jittered treads,
/// optional landings, then a top platform. `down` mirrors the profile in height.
inline GeneratedTerrain generate_stairs(const StairParams& params, std::uint64_t seed, const TerrainGrid& grid = {}) {
  params.validate();
  Rng rng(derive_seed(seed, 0x51u));
  TerrainLayout layout;
  double x = params.approach_length;
  for (int k = 1; k <= params.step_count; ++k) {
    layout.riser_x.push_back(x);
    const double u = rng.uniform(-params.tread_jitter_fraction, params.tread_jitter_fraction);
    double tread = params.tread * (1.0 + u);
    if (params.landing_interval && k % *params.landing_interval == 0 && k < params.step_count) {
      tread = std::max(tread, params.landing_depth);
    }
    layout.treads.push_back(tread);
    x += tread;
  }
  layout.stairs_end_x = x;
  layout.length = x + params.top_length;
  layout.corridor_halfwidth = 0.5 * grid.width;
  layout.spawn_front_x = layout.riser_x.front() - 0.20;
  layout.goal_x = layout.stairs_end_x;

  std::vector<float> floor;
  std::size_t rows = 0, cols = 0;
  detail::make_corridor(grid, layout.length, &floor, &rows, &cols);
  const int n = params.step_count;
  std::vector<float> profile(cols);
  std::size_t k = 0;  // risers at or behind the cell centre
  for (std::size_t j = 0; j < cols; ++j) {
    const double xc = detail::cell_center_x(grid, j);
    while (k < layout.riser_x.size() && layout.riser_x[k] <= xc) ++k;
    const int level = params.direction == StairDirection::up ? static_cast<int>(k) : n - static_cast<int>(k);
    profile[j] = static_cast<float>(static_cast<double>(level) * params.riser);
  }
  for (std::size_t i = 0; i < rows; ++i) std::copy(profile.begin(), profile.end(), floor.begin() + i * cols);
  return {detail::finish(grid, rows, cols, std::move(floor)), std::move(layout)};
}

/// Dart-throwing Poisson-disk placement. The obstacle count is Poisson with mean
/// density * placement area; densities that the minimum spacing cannot pack are rejected.
inline GeneratedTerrain generate_obstacle_field(const ObstacleFieldParams& params, double density,
                                                std::uint64_t seed, const TerrainGrid& grid_in = {}) {
  params.validate();
  if (!(density >= 0.0) || !std::isfinite(density)) throw TerrainError("density must be >= 0");
  // Random sequential addition jams near 0.55 area fraction; stay well below it.
  constexpr double kMaxPackedFraction = 0.5;
  const double r = params.min_spacing;
  if (density * r * r > kMaxPackedFraction) {
    throw TerrainError("obstacle density " + std::to_string(density) + "/m^2 infeasible with minimum spacing " +
                       std::to_string(r) + " m");
  }
  TerrainGrid grid = grid_in;
  grid.width = 2.0 * params.corridor_halfwidth;
  Rng rng(derive_seed(seed, 0x0Bu));
  TerrainLayout layout;
  layout.length = params.corridor_length;
  layout.corridor_halfwidth = params.corridor_halfwidth;
  layout.spawn_front_x = 0.5;

  const double x0 = params.spawn_clear, x1 = params.corridor_length - params.end_clear;
  const double y0 = -params.corridor_halfwidth, y1 = params.corridor_halfwidth;
  const auto target = rng.poisson(density * params.placement_area());
  const std::size_t max_attempts = 1000 + 2000 * target;
  std::size_t attempts = 0;
  while (layout.obstacles.size() < target) {
    if (++attempts > max_attempts) {
      throw TerrainError("could not place " + std::to_string(target) + " obstacles at spacing " + std::to_string(r));
    }
    const double ox = rng.uniform(x0, x1);
    const double oy = rng.uniform(y0, y1);
    bool ok = true;
    for (const auto& o : layout.obstacles) {
      if ((o.x - ox) * (o.x - ox) + (o.y - oy) * (o.y - oy) < r * r) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const auto& shape = params.shape_set[rng.below(params.shape_set.size())];
    Obstacle ob;
    ob.footprint = shape.footprint;
    ob.x = ox;
    ob.y = oy;
    ob.size_a = rng.uniform(shape.size_min, shape.size_max);
    ob.size_b = rng.uniform(shape.size_min, shape.size_max);
    ob.rotation = rng.uniform(0.0, std::numbers::pi);
    ob.sides = 5 + static_cast<int>(rng.below(4));
    ob.height = rng.uniform(shape.height_min, shape.height_max);
    layout.obstacles.push_back(ob);
  }
  double last_x = 0.0;
  for (const auto& o : layout.obstacles) last_x = std::max(last_x, o.x);
  layout.goal_x = layout.obstacles.empty() ? params.corridor_length - params.end_clear : last_x + 1.0;

  std::vector<float> floor;
  std::size_t rows = 0, cols = 0;
  detail::make_corridor(grid, params.corridor_length, &floor, &rows, &cols);
  for (const auto& o : layout.obstacles) {
    const double br = o.bounding_radius();
    const auto j_lo = static_cast<std::ptrdiff_t>(std::floor((o.x - br) / grid.cell_size));
    const auto j_hi = static_cast<std::ptrdiff_t>(std::ceil((o.x + br) / grid.cell_size));
    const auto i_lo = static_cast<std::ptrdiff_t>(std::floor((o.y - br - y0) / grid.cell_size));
    const auto i_hi = static_cast<std::ptrdiff_t>(std::ceil((o.y + br - y0) / grid.cell_size));
    for (auto i = std::max<std::ptrdiff_t>(0, i_lo); i <= std::min<std::ptrdiff_t>(rows - 1, i_hi); ++i) {
      for (auto j = std::max<std::ptrdiff_t>(0, j_lo); j <= std::min<std::ptrdiff_t>(cols - 1, j_hi); ++j) {
        if (o.contains(detail::cell_center_x(grid, j), detail::cell_center_y(grid, i))) {
          float& h = floor[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
          h = std::max(h, static_cast<float>(o.height));
        }
      }
    }
  }
  return {detail::finish(grid, rows, cols, std::move(floor)), std::move(layout)};
}

/// Flat floor with one or two floating slabs. A slab's forward extent is
/// max(tunnel_length, obstacle_thickness); laterally it covers |y| <= width / 2.
inline GeneratedTerrain generate_tunnel(const TunnelParams& params, std::uint64_t /*seed*/,
                                        const TerrainGrid& grid = {}) {
  params.validate();
  TerrainLayout layout;
  const double first = params.approach_distance;
  const double first_end = first + std::max(params.tunnel_length, params.obstacle_thickness);
  layout.slabs.emplace_back(first, first_end);
  if (params.second_gap) {
    const double s0 = first_end + *params.second_gap;
    layout.slabs.emplace_back(s0, s0 + std::max(params.second_length, params.obstacle_thickness));
  }
  const double exit_x = layout.slabs.back().second;
  layout.length = exit_x + params.exit_length;
  layout.corridor_halfwidth = 0.5 * grid.width;
  layout.spawn_front_x = first - 0.30;
  layout.goal_x = exit_x + 0.5;

  std::vector<float> floor;
  std::size_t rows = 0, cols = 0;
  detail::make_corridor(grid, layout.length, &floor, &rows, &cols);
  std::vector<float> ceiling(rows * cols, std::numeric_limits<float>::quiet_NaN());
  const auto ceiling_value = static_cast<float>(params.clearance);
  for (std::size_t i = 0; i < rows; ++i) {
    if (std::abs(detail::cell_center_y(grid, i)) > 0.5 * params.obstacle_width) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xc = detail::cell_center_x(grid, j);
      for (const auto& [s0, s1] : layout.slabs) {
        if (xc >= s0 && xc < s1) ceiling[i * cols + j] = ceiling_value;
      }
    }
  }
  return {detail::finish(grid, rows, cols, std::move(floor), std::move(ceiling)), std::move(layout)};
}

/// Raised ridges across the corridor. The seed shifts the first joist within one period.
inline GeneratedTerrain generate_joists(const JoistParams& params, std::uint64_t seed, const TerrainGrid& grid = {}) {
  params.validate();
  Rng rng(derive_seed(seed, 0x10u));
  TerrainLayout layout;
  layout.length = params.corridor_length;
  layout.corridor_halfwidth = 0.5 * grid.width;
  layout.spawn_front_x = 0.5;
  // keep the shift a whole number of cells so the rasterised period is exact
  const auto period_cells = static_cast<long>(std::lround(params.spacing / grid.cell_size));
  const double shift = static_cast<double>(rng.below(static_cast<std::uint64_t>(std::max(1L, period_cells)))) *
                       grid.cell_size;
  for (double x = params.start_clear + shift; x + 0.5 * params.width < params.corridor_length - 1.0;
       x += params.spacing) {
    layout.joist_x.push_back(x);
  }
  layout.goal_x = params.corridor_length - 1.0;

  std::vector<float> floor;
  std::size_t rows = 0, cols = 0;
  detail::make_corridor(grid, params.corridor_length, &floor, &rows, &cols);
  std::vector<float> profile(cols, 0.0f);
  for (std::size_t j = 0; j < cols; ++j) {
    const double xc = detail::cell_center_x(grid, j);
    for (double jx : layout.joist_x) {
      if (std::abs(xc - jx) < 0.5 * params.width) profile[j] = static_cast<float>(params.height);
    }
  }
  for (std::size_t i = 0; i < rows; ++i) std::copy(profile.begin(), profile.end(), floor.begin() + i * cols);
  return {detail::finish(grid, rows, cols, std::move(floor)), std::move(layout)};
}

// ---------------------------------------------------------------------------
// Task terrain selection

struct FlatTerrain {
  double length = 10.0;
};
struct ObstacleTerrain {
  ObstacleFieldParams params;
  double density = 0.0;
};

/// Explicit terrain choice; overrides the task's curriculum-driven terrain.
using TerrainSpec = std::variant<FlatTerrain, StairParams, ObstacleTerrain, TunnelParams, JoistParams>;

/// Curriculum-dependent defaults for each task.
struct CurriculumSettings {
  double obstacle_density_final = 0.15;
  bool cap_density = false;
  int stair_steps = 8;
  StairDirection stair_direction = StairDirection::up;
  double tread_jitter = 0.2;
};

inline TerrainSpec terrain_for_level(Task task, const CurriculumLevel& lvl, std::uint64_t seed,
                                     const CurriculumSettings& settings = {}) {
  lvl.validate();
  switch (task) {
    case Task::stairs: {
      auto p = stair_params_for_level(lvl);
      p.step_count = settings.stair_steps;
      p.direction = settings.stair_direction;
      p.tread_jitter_fraction = settings.tread_jitter;
      return p;
    }
    case Task::avoidance:
      return ObstacleTerrain{{}, obstacle_density_for_level(lvl, settings.obstacle_density_final, settings.cap_density)};
    case Task::squeeze: return tunnel_params_for_level(lvl, seed);
    case Task::joist: return JoistParams{};
  }
  return FlatTerrain{};
}

inline GeneratedTerrain generate_terrain(const TerrainSpec& spec, std::uint64_t seed, const TerrainGrid& grid = {}) {
  return std::visit(
      [&](const auto& p) -> GeneratedTerrain {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FlatTerrain>) return generate_flat(p.length, grid);
        else if constexpr (std::is_same_v<T, StairParams>) return generate_stairs(p, seed, grid);
        else if constexpr (std::is_same_v<T, ObstacleTerrain>) return generate_obstacle_field(p.params, p.density, seed, grid);
        else if constexpr (std::is_same_v<T, TunnelParams>) return generate_tunnel(p, seed, grid);
        else return generate_joists(p, seed, grid);
      },
      spec);
}

}  // namespace hexsim
