#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexsim/env.hpp"

namespace hexsim::proto {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7777;
inline constexpr std::uint32_t kMaxFrame = 64u << 20;

enum class MsgType : std::uint8_t {
  hello = 0x01,
  configure = 0x02,
  reset = 0x03,
  step = 0x04,
  close = 0x06,
  hello_ack = 0x81,
  configure_ack = 0x82,
  obs = 0x85,
  error = 0x7F,
};

enum class ErrorCode : std::uint16_t {
  malformed = 1,
  not_configured = 2,
  bad_config = 3,
  bad_action_shape = 4,
  unknown_type = 5,
};

enum ObsSelect : std::uint8_t { kTeacher = 1, kStudent = 2, kBoth = 3 };

enum Capability : std::uint32_t { kCapTeacher = 1, kCapStudent = 2, kCapDepth = 4 };

struct ProtocolError : std::runtime_error {
  ErrorCode code;
  ProtocolError(ErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// ---------------------------------------------------------------------------
// Byte helpers: frame header big-endian, payload little-endian

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int k = 0; k < 2; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void reserve(std::size_t n) { buf_.reserve(n); }
  std::vector<std::uint8_t>& data() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string rest_string() {
    std::string s(reinterpret_cast<const char*>(in_.data()) + pos_, in_.size() - pos_);
    pos_ = in_.size();
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (pos_ != in_.size()) throw ProtocolError(ErrorCode::malformed, "trailing bytes in payload");
  }

 private:
  std::uint64_t take(std::size_t n) {
    if (in_.size() - pos_ < n) throw ProtocolError(ErrorCode::malformed, "payload too short");
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(in_[pos_ + k]) << (8 * k);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

struct Frame {
  MsgType type = MsgType::hello;
  std::vector<std::uint8_t> payload;
};

/// Length prefix (u32 big-endian) counts the type byte plus the payload.
inline std::vector<std::uint8_t> encode_frame(MsgType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 5);
  const auto len = static_cast<std::uint32_t>(payload.size() + 1);
  for (int k = 3; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(len >> (8 * k)));
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline std::uint32_t decode_length(const std::uint8_t header[4]) {
  return (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) | (std::uint32_t{header[2]} << 8) |
         std::uint32_t{header[3]};
}

/// Parses one complete frame from the front of `in`; nullopt if more bytes are needed.
inline std::optional<Frame> decode_frame(std::span<const std::uint8_t> in, std::size_t* consumed = nullptr) {
  if (in.size() < 4) return std::nullopt;
  const std::uint32_t len = decode_length(in.data());
  if (len == 0 || len > kMaxFrame) throw ProtocolError(ErrorCode::malformed, "bad frame length");
  if (in.size() < 4 + std::size_t{len}) return std::nullopt;
  Frame f;
  f.type = static_cast<MsgType>(in[4]);
  f.payload.assign(in.begin() + 5, in.begin() + 4 + len);
  if (consumed) *consumed = 4 + len;
  return f;
}

// ---------------------------------------------------------------------------
// Messages

struct Hello {
  std::uint32_t version = kVersion;
};

struct HelloAck {
  std::uint32_t version = kVersion;
  std::uint32_t capabilities = kCapTeacher | kCapStudent | kCapDepth;
};

struct Configure {
  Task task = Task::stairs;
  std::uint32_t level = 0;
  std::uint32_t total_levels = 10;
  std::uint32_t batch = 1;
  std::uint64_t seed = 0;
  std::uint8_t obs_select = kTeacher;
  std::uint32_t max_steps = 1000;
};

/// Dimensions of every OBS that follows.
struct Layout {
  std::uint32_t batch = 0;
  std::uint8_t obs_select = kTeacher;
  std::uint32_t depth_width = 0;
  std::uint32_t depth_height = 0;
  std::uint32_t patch_rows = 0;
  std::uint32_t patch_cols = 0;
  std::uint32_t proprio = 0;
  std::uint32_t pose = 0;
  std::uint32_t action = 0;

  bool teacher() const { return obs_select & kTeacher; }
  bool student() const { return obs_select & kStudent; }
  bool operator==(const Layout&) const = default;
};

struct EnvObs {
  std::vector<float> depth;    // depth_width * depth_height, row-major (student)
  std::vector<float> pose;     // x y z qw qx qy qz (student)
  std::vector<float> action;   // previous action (student)
  std::vector<float> patch;    // patch_rows * patch_cols (teacher)
  std::vector<float> proprio;  // (teacher)
  bool operator==(const EnvObs&) const = default;
};

struct Obs {
  Layout layout;
  std::vector<EnvObs> envs;
  std::vector<float> rewards;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> reason;
  bool operator==(const Obs&) const = default;
};

struct Error {
  ErrorCode code = ErrorCode::malformed;
  std::string message;
};

inline std::vector<std::uint8_t> encode(const Hello& m) {
  Writer w;
  w.u32(m.version);
  return std::move(w.data());
}
inline Hello decode_hello(std::span<const std::uint8_t> p) {
  Reader r(p);
  Hello m{r.u32()};
  r.expect_end();
  return m;
}

inline std::vector<std::uint8_t> encode(const HelloAck& m) {
  Writer w;
  w.u32(m.version);
  w.u32(m.capabilities);
  return std::move(w.data());
}
inline HelloAck decode_hello_ack(std::span<const std::uint8_t> p) {
  Reader r(p);
  HelloAck m;
  m.version = r.u32();
  m.capabilities = r.u32();
  r.expect_end();
  return m;
}

inline std::vector<std::uint8_t> encode(const Configure& m) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(m.task));
  w.u32(m.level);
  w.u32(m.total_levels);
  w.u32(m.batch);
  w.u64(m.seed);
  w.u8(m.obs_select);
  w.u32(m.max_steps);
  return std::move(w.data());
}
inline Configure decode_configure(std::span<const std::uint8_t> p) {
  Reader r(p);
  Configure m;
  const auto task = r.u8();
  if (task > 3) throw ProtocolError(ErrorCode::bad_config, "unknown task id");
  m.task = static_cast<Task>(task);
  m.level = r.u32();
  m.total_levels = r.u32();
  m.batch = r.u32();
  m.seed = r.u64();
  m.obs_select = r.u8();
  m.max_steps = r.u32();
  r.expect_end();
  return m;
}

inline void encode_layout(Writer& w, const Layout& l) {
  w.u32(l.batch);
  w.u8(l.obs_select);
  w.u32(l.depth_width);
  w.u32(l.depth_height);
  w.u32(l.patch_rows);
  w.u32(l.patch_cols);
  w.u32(l.proprio);
  w.u32(l.pose);
  w.u32(l.action);
}
inline Layout decode_layout(Reader& r) {
  Layout l;
  l.batch = r.u32();
  l.obs_select = r.u8();
  l.depth_width = r.u32();
  l.depth_height = r.u32();
  l.patch_rows = r.u32();
  l.patch_cols = r.u32();
  l.proprio = r.u32();
  l.pose = r.u32();
  l.action = r.u32();
  return l;
}

inline std::vector<std::uint8_t> encode(const Layout& l) {
  Writer w;
  encode_layout(w, l);
  return std::move(w.data());
}
inline Layout decode_configure_ack(std::span<const std::uint8_t> p) {
  Reader r(p);
  Layout l = decode_layout(r);
  r.expect_end();
  return l;
}

inline std::vector<std::uint8_t> encode_step(std::span<const JointVector> actions) {
  Writer w;
  w.reserve(actions.size() * kJointCount * 4);
  for (const auto& a : actions) {
    for (double v : a) w.f32(static_cast<float>(v));
  }
  return std::move(w.data());
}
inline std::vector<JointVector> decode_step(std::span<const std::uint8_t> p, std::size_t batch) {
  if (p.size() != batch * kJointCount * 4) {
    throw ProtocolError(ErrorCode::bad_action_shape, "expected " + std::to_string(batch) + "x18 f32 actions");
  }
  Reader r(p);
  std::vector<JointVector> out(batch);
  for (auto& a : out) {
    for (double& v : a) v = r.f32();
  }
  return out;
}

inline std::vector<std::uint8_t> encode(const Obs& m) {
  const Layout& l = m.layout;
  Writer w;
  w.reserve(64 + l.batch * 4 * (l.depth_width * l.depth_height + l.pose + l.action + l.patch_rows * l.patch_cols +
                                l.proprio + 2));
  encode_layout(w, l);
  for (const auto& e : m.envs) {
    if (l.student()) {
      for (float v : e.depth) w.f32(v);
      for (float v : e.pose) w.f32(v);
      for (float v : e.action) w.f32(v);
    }
    if (l.teacher()) {
      for (float v : e.patch) w.f32(v);
      for (float v : e.proprio) w.f32(v);
    }
  }
  for (float v : m.rewards) w.f32(v);
  for (auto v : m.done) w.u8(v);
  for (auto v : m.reason) w.u8(v);
  return std::move(w.data());
}

inline Obs decode_obs(std::span<const std::uint8_t> p) {
  Reader r(p);
  Obs m;
  m.layout = decode_layout(r);
  const Layout& l = m.layout;
  const std::size_t per_env = (l.student() ? std::size_t{l.depth_width} * l.depth_height + l.pose + l.action : 0) +
                              (l.teacher() ? std::size_t{l.patch_rows} * l.patch_cols + l.proprio : 0);
  if (r.remaining() != l.batch * (per_env * 4 + 6)) throw ProtocolError(ErrorCode::malformed, "OBS size mismatch");
  auto read = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (float& x : v) x = r.f32();
  };
  m.envs.resize(l.batch);
  for (auto& e : m.envs) {
    if (l.student()) {
      read(e.depth, std::size_t{l.depth_width} * l.depth_height);
      read(e.pose, l.pose);
      read(e.action, l.action);
    }
    if (l.teacher()) {
      read(e.patch, std::size_t{l.patch_rows} * l.patch_cols);
      read(e.proprio, l.proprio);
    }
  }
  read(m.rewards, l.batch);
  m.done.resize(l.batch);
  for (auto& v : m.done) v = r.u8();
  m.reason.resize(l.batch);
  for (auto& v : m.reason) v = r.u8();
  r.expect_end();
  return m;
}

inline std::vector<std::uint8_t> encode(const Error& m) {
  Writer w;
  w.u16(static_cast<std::uint16_t>(m.code));
  const auto* s = reinterpret_cast<const std::uint8_t*>(m.message.data());
  w.bytes({s, m.message.size()});
  return std::move(w.data());
}
inline Error decode_error(std::span<const std::uint8_t> p) {
  Reader r(p);
  Error m;
  m.code = static_cast<ErrorCode>(r.u16());
  m.message = r.rest_string();
  return m;
}

// ---------------------------------------------------------------------------
// Engine glue

inline Layout make_layout(const Configure& c) {
  const TaskSensing s = task_sensing(c.task);
  Layout l;
  l.batch = c.batch;
  l.obs_select = c.obs_select;
  if (l.student()) {
    l.depth_width = CameraModel::kWidth;
    l.depth_height = CameraModel::kHeight;
    l.pose = 7;
    l.action = kJointCount;
  }
  if (l.teacher()) {
    l.patch_rows = static_cast<std::uint32_t>(s.patch.rows());
    l.patch_cols = static_cast<std::uint32_t>(s.patch.cols());
    l.proprio = static_cast<std::uint32_t>(kProprioSize);
  }
  return l;
}

/// Validates a CONFIGURE request and turns it into a batch configuration.
inline BatchConfig make_batch_config(const Configure& c, std::uint32_t max_batch = 4096) {
  if (c.batch < 1 || c.batch > max_batch) throw ProtocolError(ErrorCode::bad_config, "batch size out of range");
  if (c.obs_select < 1 || c.obs_select > 3) throw ProtocolError(ErrorCode::bad_config, "obs_select must be 1, 2 or 3");
  if (c.total_levels < 1 || c.level > c.total_levels || c.total_levels > 1000000) {
    throw ProtocolError(ErrorCode::bad_config, "level out of range");
  }
  if (c.max_steps < 1) throw ProtocolError(ErrorCode::bad_config, "max_steps must be >= 1");
  BatchConfig b;
  b.batch = c.batch;
  b.seed = c.seed;
  b.episode.task = c.task;
  b.episode.level = {static_cast<int>(c.level), static_cast<int>(c.total_levels)};
  b.episode.max_steps = static_cast<int>(c.max_steps);
  b.episode.render_depth = (c.obs_select & kStudent) != 0;
  return b;
}

inline Obs make_obs(const Layout& l, const std::vector<StepResult>& results, bool with_rewards) {
  Obs m;
  m.layout = l;
  m.envs.resize(results.size());
  m.rewards.assign(results.size(), 0.0f);
  m.done.assign(results.size(), 0);
  m.reason.assign(results.size(), 0);
  for (std::size_t s = 0; s < results.size(); ++s) {
    const auto& r = results[s];
    auto& e = m.envs[s];
    if (l.student()) {
      e.depth = r.student.depth.data;
      e.pose.assign(r.student.pose.begin(), r.student.pose.end());
      e.action.assign(r.student.last_action.begin(), r.student.last_action.end());
    }
    if (l.teacher()) {
      e.patch.assign(r.teacher.patch.values.begin(), r.teacher.patch.values.end());
      e.proprio.assign(r.teacher.proprio.begin(), r.teacher.proprio.end());
    }
    if (with_rewards) {
      m.rewards[s] = static_cast<float>(r.reward.total);
      m.done[s] = r.done ? 1 : 0;
      m.reason[s] = static_cast<std::uint8_t>(r.reason);
    }
  }
  return m;
}

}  // namespace hexsim::proto
