#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hexsim {

struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Regular grid of floor heights with an optional ceiling layer.
///
/// Cell (i, j) is centred at (origin_x + j * cell_size, origin_y + i * cell_size):
/// columns run along +x (the travel direction of every generated corridor), rows
/// along +y. Storage is row-major f32, matching the on-disk `.hxm` layout. A ceiling
/// value is the underside of an overhead slab; NaN marks "no slab above this cell".
class LayeredHeightField {
 public:
  LayeredHeightField(std::size_t rows, std::size_t cols, double cell_size, double origin_x, double origin_y,
                     std::vector<float> floor, std::optional<std::vector<float>> ceiling = std::nullopt)
      // Metadata is held at f32 precision so `.hxm` round trips are exact.
      : rows_(rows),
        cols_(cols),
        cell_(static_cast<float>(cell_size)),
        ox_(static_cast<float>(origin_x)),
        oy_(static_cast<float>(origin_y)),
        floor_(std::move(floor)) {
    if (rows_ < 1 || cols_ < 1) throw GeometryError("height field needs at least one row and one column");
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) throw GeometryError("cell size must be positive");
    if (floor_.size() != rows_ * cols_) throw GeometryError("floor size does not match rows*cols");
    for (float v : floor_) {
      if (!std::isfinite(v)) throw GeometryError("floor heights must be finite");
    }
    if (ceiling) set_ceiling(std::move(*ceiling));
  }

  /// Flat field of constant height.
  static LayeredHeightField flat(std::size_t rows, std::size_t cols, double cell_size, double origin_x,
                                 double origin_y, float height = 0.0f) {
    return {rows, cols, cell_size, origin_x, origin_y, std::vector<float>(rows * cols, height)};
  }

  void set_ceiling(std::vector<float> ceiling) {
    if (ceiling.size() != rows_ * cols_) throw GeometryError("ceiling size does not match rows*cols");
    for (std::size_t k = 0; k < ceiling.size(); ++k) {
      const float c = ceiling[k];
      if (std::isnan(c)) continue;
      if (!std::isfinite(c) || !(c > floor_[k])) throw GeometryError("ceiling must lie strictly above the floor");
    }
    ceiling_ = std::move(ceiling);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double cell_size() const noexcept { return cell_; }
  double origin_x() const noexcept { return ox_; }
  double origin_y() const noexcept { return oy_; }
  bool has_ceiling() const noexcept { return ceiling_.has_value(); }

  float floor_at(std::size_t i, std::size_t j) const noexcept { return floor_[i * cols_ + j]; }
  /// NaN when absent or when the field has no ceiling layer.
  float ceiling_at(std::size_t i, std::size_t j) const noexcept {
    return ceiling_ ? (*ceiling_)[i * cols_ + j] : std::numeric_limits<float>::quiet_NaN();
  }

  std::span<const float> floor_data() const noexcept { return floor_; }
  std::span<const float> ceiling_data() const noexcept {
    return ceiling_ ? std::span<const float>(*ceiling_) : std::span<const float>();
  }

  /// Continuous grid coordinates (column, row) of a world point.
  double col_coord(double x) const noexcept { return (x - ox_) / cell_; }
  double row_coord(double y) const noexcept { return (y - oy_) / cell_; }

  /// Nearest cell index, clamped into the grid.
  std::size_t nearest_col(double x) const noexcept { return clamp_index(std::floor(col_coord(x) + 0.5), cols_); }
  std::size_t nearest_row(double y) const noexcept { return clamp_index(std::floor(row_coord(y) + 0.5), rows_); }

  double x_extent_min() const noexcept { return ox_ - 0.5 * cell_; }
  double x_extent_max() const noexcept { return ox_ + (static_cast<double>(cols_) - 0.5) * cell_; }
  double y_extent_min() const noexcept { return oy_ - 0.5 * cell_; }
  double y_extent_max() const noexcept { return oy_ + (static_cast<double>(rows_) - 0.5) * cell_; }

  bool operator==(const LayeredHeightField& other) const {
    auto same_bits = [](std::span<const float> a, std::span<const float> b) {
      return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
    };
    return rows_ == other.rows_ && cols_ == other.cols_ && cell_ == other.cell_ && ox_ == other.ox_ &&
           oy_ == other.oy_ && same_bits(floor_, other.floor_) && has_ceiling() == other.has_ceiling() &&
           same_bits(ceiling_data(), other.ceiling_data());
  }

  static std::size_t clamp_index(double idx, std::size_t n) noexcept {
    if (!(idx > 0.0)) return 0;
    const double hi = static_cast<double>(n - 1);
    return idx >= hi ? n - 1 : static_cast<std::size_t>(idx);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  double cell_;
  double ox_;
  double oy_;
  std::vector<float> floor_;
  std::optional<std::vector<float>> ceiling_;
};

/// Bilinear floor height. Points outside the grid take the nearest edge value.
inline double sample_floor(const LayeredHeightField& field, double x, double y) noexcept {
  const double last_c = static_cast<double>(field.cols() - 1);
  const double last_r = static_cast<double>(field.rows() - 1);
  const double u = std::clamp(field.col_coord(x), 0.0, last_c);
  const double v = std::clamp(field.row_coord(y), 0.0, last_r);
  const auto j0 = static_cast<std::size_t>(u);
  const auto i0 = static_cast<std::size_t>(v);
  const std::size_t j1 = std::min(j0 + 1, field.cols() - 1);
  const std::size_t i1 = std::min(i0 + 1, field.rows() - 1);
  const double fu = u - static_cast<double>(j0);
  const double fv = v - static_cast<double>(i0);
  const double h00 = field.floor_at(i0, j0);
  const double h01 = field.floor_at(i0, j1);
  const double h10 = field.floor_at(i1, j0);
  const double h11 = field.floor_at(i1, j1);
  const double a = h00 + (h01 - h00) * fu;
  const double b = h10 + (h11 - h10) * fu;
  return a + (b - a) * fv;
}

/// Nearest-cell ceiling height; nullopt where no slab is present.
inline std::optional<double> sample_ceiling(const LayeredHeightField& field, double x, double y) noexcept {
  if (!field.has_ceiling()) return std::nullopt;
  const float c = field.ceiling_at(field.nearest_row(y), field.nearest_col(x));
  if (std::isnan(c)) return std::nullopt;
  return static_cast<double>(c);
}

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

/// Robot-relative rectangle sampled ahead of the robot.
struct PatchSpec {
  double width = 0.6;     // lateral extent [m]
  double length = 0.8;    // forward extent [m]
  double standoff = 0.3;  // robot front to near edge [m]
  double cell_size = 0.05;

  std::size_t rows() const { return static_cast<std::size_t>(std::lround(length / cell_size)); }
  std::size_t cols() const { return static_cast<std::size_t>(std::lround(width / cell_size)); }

  void validate() const {
    if (!(width > 0.0) || !(length > 0.0) || !(standoff >= 0.0) || !(cell_size > 0.0)) {
      throw GeometryError("invalid patch spec");
    }
  }
};

enum class PatchLayer : std::uint8_t { floor_only = 0, squeeze_composite = 1 };

/// Row 0 is the far edge, the last row is nearest the robot; column 0 is leftmost (+y).
struct HeightPatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  PatchLayer layer = PatchLayer::floor_only;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

/// Samples `spec` ahead of a robot whose front point lies `front_offset` metres ahead
/// of `pose` along its heading. Floor cells are bilinear; a squeeze-composite cell
/// takes the ceiling height where a slab is overhead and the floor height otherwise.
inline HeightPatch extract_patch(const LayeredHeightField& field, const PlanarPose& pose, const PatchSpec& spec,
                                 PatchLayer layer, double front_offset = 0.0) {
  spec.validate();
  HeightPatch patch;
  patch.rows = spec.rows();
  patch.cols = spec.cols();
  patch.layer = layer;
  patch.values.resize(patch.rows * patch.cols);
  const double cy = std::cos(pose.yaw);
  const double sy = std::sin(pose.yaw);
  const double m = static_cast<double>(patch.rows);
  for (std::size_t r = 0; r < patch.rows; ++r) {
    const double fwd = front_offset + spec.standoff + (m - static_cast<double>(r) - 0.5) * spec.cell_size;
    for (std::size_t c = 0; c < patch.cols; ++c) {
      const double lat = 0.5 * spec.width - (static_cast<double>(c) + 0.5) * spec.cell_size;
      const double x = pose.x + fwd * cy - lat * sy;
      const double y = pose.y + fwd * sy + lat * cy;
      double h = sample_floor(field, x, y);
      if (layer == PatchLayer::squeeze_composite) {
        if (auto ceil = sample_ceiling(field, x, y)) h = *ceil;
      }
      patch.at(r, c) = h;
    }
  }
  return patch;
}

// ---------------------------------------------------------------------------
// .hxm binary format
//
//   "HXHM" | u32 version=1 | u32 rows | u32 cols | f32 cell_size | f32 origin_x |
//   f32 origin_y | rows*cols f32 floor | u8 has_ceiling | [rows*cols f32 ceiling]
//
// All numbers little-endian, arrays row-major, NaN ceiling = absent.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
inline void put_f32le(std::vector<std::uint8_t>& out, float v) { put_u32le(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw GeometryError("truncated .hxm data");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in[pos + k]) << (8 * k);
  pos += 4;
  return v;
}
inline float get_f32le(std::span<const std::uint8_t> in, std::size_t& pos) {
  return std::bit_cast<float>(get_u32le(in, pos));
}

}  // namespace detail

inline constexpr std::uint32_t kHxmVersion = 1;

inline std::vector<std::uint8_t> encode_hxm(const LayeredHeightField& field) {
  std::vector<std::uint8_t> out;
  out.reserve(29 + field.rows() * field.cols() * 8);
  for (char ch : {'H', 'X', 'H', 'M'}) out.push_back(static_cast<std::uint8_t>(ch));
  detail::put_u32le(out, kHxmVersion);
  detail::put_u32le(out, static_cast<std::uint32_t>(field.rows()));
  detail::put_u32le(out, static_cast<std::uint32_t>(field.cols()));
  detail::put_f32le(out, static_cast<float>(field.cell_size()));
  detail::put_f32le(out, static_cast<float>(field.origin_x()));
  detail::put_f32le(out, static_cast<float>(field.origin_y()));
  for (float v : field.floor_data()) detail::put_f32le(out, v);
  out.push_back(field.has_ceiling() ? 1 : 0);
  for (float v : field.ceiling_data()) detail::put_f32le(out, v);
  return out;
}

inline LayeredHeightField decode_hxm(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "HXHM", 4) != 0) throw GeometryError("not an .hxm file");
  std::size_t pos = 4;
  const std::uint32_t version = detail::get_u32le(in, pos);
  if (version != kHxmVersion) throw GeometryError("unsupported .hxm version " + std::to_string(version));
  const std::size_t rows = detail::get_u32le(in, pos);
  const std::size_t cols = detail::get_u32le(in, pos);
  const double cell = detail::get_f32le(in, pos);
  const double ox = detail::get_f32le(in, pos);
  const double oy = detail::get_f32le(in, pos);
  if (rows == 0 || cols == 0 || rows * cols > (std::size_t{1} << 30)) throw GeometryError("bad .hxm dimensions");
  std::vector<float> floor(rows * cols);
  for (auto& v : floor) v = detail::get_f32le(in, pos);
  if (pos >= in.size()) throw GeometryError("truncated .hxm data");
  const std::uint8_t has_ceiling = in[pos++];
  std::optional<std::vector<float>> ceiling;
  if (has_ceiling == 1) {
    ceiling.emplace(rows * cols);
    for (auto& v : *ceiling) v = detail::get_f32le(in, pos);
  } else if (has_ceiling != 0) {
    throw GeometryError("bad .hxm ceiling flag");
  }
  if (pos != in.size()) throw GeometryError("trailing bytes in .hxm data");
  return {rows, cols, cell, ox, oy, std::move(floor), std::move(ceiling)};
}

inline void save_hxm(const LayeredHeightField& field, const std::string& path) {
  const auto bytes = encode_hxm(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline LayeredHeightField load_hxm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_hxm(bytes);
}

}  // namespace hexsim
