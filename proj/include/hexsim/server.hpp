#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hexsim/env.hpp"
#include "hexsim/protocol.hpp"

namespace hexsim {

namespace net {

inline bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

/// false on EOF or error before `n` bytes arrived.
inline bool read_all(int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

inline bool send_frame(int fd, proto::MsgType type, std::span<const std::uint8_t> payload) {
  const auto bytes = proto::encode_frame(type, payload);
  return write_all(fd, bytes.data(), bytes.size());
}

enum class ReadStatus { ok, closed, malformed };

inline ReadStatus read_frame(int fd, proto::Frame& out) {
  std::uint8_t header[4];
  if (!read_all(fd, header, 4)) return ReadStatus::closed;
  const std::uint32_t len = proto::decode_length(header);
  if (len == 0 || len > proto::kMaxFrame) return ReadStatus::malformed;
  std::uint8_t type = 0;
  if (!read_all(fd, &type, 1)) return ReadStatus::closed;
  out.type = static_cast<proto::MsgType>(type);
  out.payload.resize(len - 1);
  if (len > 1 && !read_all(fd, out.payload.data(), len - 1)) return ReadStatus::closed;
  return ReadStatus::ok;
}

}  // namespace net

/// One connection's environments. Strict request/reply.
class Session {
 public:
  /// Handles one request; returns the reply. `close` is set when the connection must end.
  proto::Frame handle(const proto::Frame& req, bool* close) {
    using proto::MsgType;
    *close = false;
    try {
      switch (req.type) {
        case MsgType::hello: {
          proto::decode_hello(req.payload);
          return {MsgType::hello_ack, proto::encode(proto::HelloAck{})};
        }
        case MsgType::configure: {
          const auto cfg = proto::decode_configure(req.payload);
          auto batch = proto::make_batch_config(cfg);
          auto env = std::make_unique<VectorEnv>(std::move(batch));
          layout_ = proto::make_layout(cfg);
          env_ = std::move(env);
          reset_done_ = false;
          return {MsgType::configure_ack, proto::encode(*layout_)};
        }
        case MsgType::reset: {
          if (!env_) throw proto::ProtocolError(proto::ErrorCode::not_configured, "RESET before CONFIGURE");
          if (!req.payload.empty()) throw proto::ProtocolError(proto::ErrorCode::malformed, "RESET takes no payload");
          reset_done_ = true;
          return {MsgType::obs, proto::encode(proto::make_obs(*layout_, env_->reset(), false))};
        }
        case MsgType::step: {
          if (!env_) throw proto::ProtocolError(proto::ErrorCode::not_configured, "STEP before CONFIGURE");
          if (!reset_done_) throw proto::ProtocolError(proto::ErrorCode::not_configured, "STEP before RESET");
          const auto actions = proto::decode_step(req.payload, env_->size());
          return {MsgType::obs, proto::encode(proto::make_obs(*layout_, env_->step(actions), true))};
        }
        case MsgType::close: *close = true; return {};
        default:
          throw proto::ProtocolError(proto::ErrorCode::unknown_type, "unknown message type");
      }
    } catch (const proto::ProtocolError& e) {
      *close = e.code == proto::ErrorCode::malformed;
      return {MsgType::error, proto::encode(proto::Error{e.code, e.what()})};
    } catch (const std::exception& e) {
      return {MsgType::error, proto::encode(proto::Error{proto::ErrorCode::bad_config, e.what()})};
    }
  }

 private:
  std::unique_ptr<VectorEnv> env_;
  std::optional<proto::Layout> layout_;
  bool reset_done_ = false;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = proto::kDefaultPort;  // 0 picks a free port
};

/// TCP listener with one thread per connection. Sessions share nothing.
class Server {
 public:
  explicit Server(ServerConfig cfg = {}) : cfg_(std::move(cfg)) {}
  ~Server() { stop(); }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting in a background thread.
  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(cfg_.port);
    if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw std::runtime_error("bad bind address " + cfg_.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
      const std::string err = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw std::runtime_error("bind/listen: " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  /// Closes the listener and every open session, then joins their threads.
  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::list<Conn> conns;
    {
      std::lock_guard lock(mu_);
      for (auto& c : conns_) ::shutdown(c.fd, SHUT_RDWR);
      conns.swap(conns_);
    }
    for (auto& c : conns) {
      if (c.thread.joinable()) c.thread.join();
    }
  }

  std::uint16_t port() const { return port_; }
  bool running() const { return running_; }

 private:
  struct Conn {
    int fd;
    std::thread thread;
  };

  void accept_loop() {
    while (running_) {
      pollfd p{listen_fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, 100);
      if (ready <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mu_);
      if (!running_) {
        ::close(fd);
        break;
      }
      // reap finished sessions
      for (auto it = conns_.begin(); it != conns_.end();) {
        if (it->fd < 0) {
          it->thread.join();
          it = conns_.erase(it);
        } else {
          ++it;
        }
      }
      conns_.push_back({fd, {}});
      Conn* c = &conns_.back();
      c->thread = std::thread([this, c, fd] { serve(fd, c); });
    }
  }

  void serve(int fd, Conn* conn) {
    Session session;
    proto::Frame req;
    while (true) {
      const auto status = net::read_frame(fd, req);
      if (status == net::ReadStatus::closed) break;
      if (status == net::ReadStatus::malformed) {
        net::send_frame(fd, proto::MsgType::error,
                        proto::encode(proto::Error{proto::ErrorCode::malformed, "bad frame length"}));
        break;
      }
      bool close = false;
      const proto::Frame reply = session.handle(req, &close);
      if (req.type == proto::MsgType::close) break;
      if (!net::send_frame(fd, reply.type, reply.payload) || close) break;
    }
    std::lock_guard lock(mu_);
    ::close(fd);
    conn->fd = -1;
  }

  ServerConfig cfg_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<Conn> conns_;
};

/// Minimal blocking client, used by tests and tooling.
class Client {
 public:
  Client() = default;
  Client(const std::string& host, std::uint16_t port) { connect(host, port); }
  ~Client() { disconnect(); }
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void connect(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      disconnect();
      throw std::runtime_error("connect failed: " + std::string(std::strerror(errno)));
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  void disconnect() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  bool send(proto::MsgType type, std::span<const std::uint8_t> payload = {}) {
    return net::send_frame(fd_, type, payload);
  }

  /// Sends raw bytes, bypassing framing.
  bool send_raw(std::span<const std::uint8_t> bytes) { return net::write_all(fd_, bytes.data(), bytes.size()); }

  /// Next frame; nullopt when the server closed the connection.
  std::optional<proto::Frame> receive() {
    proto::Frame f;
    if (net::read_frame(fd_, f) != net::ReadStatus::ok) return std::nullopt;
    return f;
  }

  std::optional<proto::Frame> request(proto::MsgType type, std::span<const std::uint8_t> payload = {}) {
    if (!send(type, payload)) return std::nullopt;
    return receive();
  }

  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

}  // namespace hexsim
