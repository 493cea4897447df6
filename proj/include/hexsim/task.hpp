#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "hexsim/heightmap.hpp"

namespace hexsim {

enum class Task : std::uint8_t { joist = 0, stairs = 1, avoidance = 2, squeeze = 3 };

inline constexpr std::array<Task, 4> kAllTasks{Task::joist, Task::stairs, Task::avoidance, Task::squeeze};

constexpr std::string_view task_name(Task t) {
  switch (t) {
    case Task::joist: return "joist";
    case Task::stairs: return "stairs";
    case Task::avoidance: return "avoidance";
    case Task::squeeze: return "squeeze";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view name) {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

/// Per-task sensing layout: privileged patch geometry and depth-camera tilt.
struct TaskSensing {
  PatchSpec patch;
  PatchLayer layer = PatchLayer::floor_only;
  double camera_tilt = 0.0;  // radians below horizontal
};

/// 0.05 m cells resolve the shallowest treads while keeping patches small.
inline constexpr double kDefaultPatchCell = 0.05;

inline TaskSensing task_sensing(Task task, double patch_cell = kDefaultPatchCell) {
  constexpr double deg30 = std::numbers::pi / 6.0;
  switch (task) {
    case Task::joist: return {{0.6, 0.8, 0.3, patch_cell}, PatchLayer::floor_only, deg30};
    case Task::stairs: return {{0.6, 0.8, 0.3, patch_cell}, PatchLayer::floor_only, deg30};
    case Task::avoidance: return {{0.6, 1.0, 0.6, patch_cell}, PatchLayer::floor_only, deg30};
    case Task::squeeze: return {{0.6, 0.8, 0.0, patch_cell}, PatchLayer::squeeze_composite, 0.0};
  }
  return {};
}

}  // namespace hexsim
