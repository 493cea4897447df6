#pragma once

// Minimal "key = value" text format shared by reward tables, geometry profiles
// and gait parameter files. Lines starting with '#' or ';' are comments,
// "[section]" headers are accepted and ignored.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hexsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class KeyValueFile {
 public:
  using Entries = std::vector<std::pair<std::string, std::string>>;

  static KeyValueFile parse(std::string_view text) {
    KeyValueFile kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string_view line = trim(text.substr(pos, end - pos));
      ++line_no;
      pos = end + 1;
      if (line.empty() || line.front() == '#' || line.front() == ';' || line.front() == '[') {
        if (end == text.size()) break;
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        value = value.substr(1, value.size() - 2);
      }
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      kv.entries_.emplace_back(std::move(key), std::move(value));
      if (end == text.size()) break;
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  const Entries& entries() const { return entries_; }

  bool has(std::string_view key) const { return find(key) != nullptr; }

  const std::string* find(std::string_view key) const {
    // last assignment wins
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->first == key) return &it->second;
    }
    return nullptr;
  }

  std::string get_string(std::string_view key, std::string fallback = {}) const {
    const auto* v = find(key);
    return v ? *v : fallback;
  }

  double get_double(std::string_view key, double fallback) const {
    const auto* v = find(key);
    return v ? to_double(*v, key) : fallback;
  }

  long long get_int(std::string_view key, long long fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    long long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size()) {
      throw ConfigError("key '" + std::string(key) + "': not an integer: " + *v);
    }
    return out;
  }

  void set(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }

  void set(std::string key, double value) {
    std::ostringstream ss;
    ss.precision(17);
    ss << value;
    set(std::move(key), ss.str());
  }

  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << to_string();
  }

  static double to_double(const std::string& s, std::string_view key = {}) {
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("key '" + std::string(key) + "': not a number: " + s);
    }
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  Entries entries_;
};

}  // namespace hexsim
