#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "motormon/wire.hpp"

namespace motormon {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

// "host:port"; throws Error(Config).
Endpoint parse_endpoint(const std::string& text);

enum class IoStatus { Ok, Eof, Timeout, Error };

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();

  IoStatus send_all(std::span<const std::uint8_t> bytes, int timeout_ms);
  // Fills `out` completely. timeout_ms < 0 waits forever; `cancel` is polled
  // every 100 ms.
  IoStatus recv_exact(std::span<std::uint8_t> out, int timeout_ms,
                      const std::atomic<bool>* cancel = nullptr);

 private:
  int fd_ = -1;
};

// Throws Error(Io) on failure.
Socket connect_tcp(const Endpoint& ep, int timeout_ms);

class Listener {
 public:
  // Binds and listens; port 0 picks a free port. Throws Error(Io).
  explicit Listener(const Endpoint& ep);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  std::optional<Socket> accept(int timeout_ms);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

enum class ReadOutcome { Message, Eof, Timeout, Error, BadCrc, Garbage };

struct ReadResult {
  ReadOutcome outcome = ReadOutcome::Error;
  Message message;
  std::string detail;
};

// Reads one framed message. A CRC mismatch consumes the frame (BadCrc); a bad
// header leaves the stream unsynchronized (Garbage).
ReadResult read_message(Socket& sock, int timeout_ms, const std::atomic<bool>* cancel = nullptr);
IoStatus write_message(Socket& sock, MessageType type, std::span<const std::uint8_t> payload,
                       int timeout_ms);

}  // namespace motormon
