#include "motormon/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "motormon/byte_io.hpp"
#include "motormon/error.hpp"

namespace motormon {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list) freeaddrinfo(list);
  }
};

void resolve(const Endpoint& ep, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const std::string port = std::to_string(ep.port);
  const char* host = ep.host.empty() ? nullptr : ep.host.c_str();
  if (int rc = getaddrinfo(host, port.c_str(), &hints, &out.list); rc != 0) {
    throw Error(ErrorCategory::Io, "cannot resolve " + ep.str() + ": " + gai_strerror(rc));
  }
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCategory::Config, "endpoint '" + text + "' must be host:port");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.size() >= 2 && ep.host.front() == '[' && ep.host.back() == ']') {
    ep.host = ep.host.substr(1, ep.host.size() - 2);
  }
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  errno = 0;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || errno != 0 || p < 0 || p > 65535) {
    throw Error(ErrorCategory::Config, "endpoint '" + text + "' has an invalid port");
  }
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

IoStatus Socket::send_all(std::span<const std::uint8_t> bytes, int timeout_ms) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    pollfd pfd{fd_, POLLOUT, 0};
    const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
    if (rc == 0) return IoStatus::Timeout;
    if (rc < 0) {
      if (errno == EINTR) continue;
      return IoStatus::Error;
    }
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      return IoStatus::Error;
    }
    sent += static_cast<std::size_t>(n);
  }
  return IoStatus::Ok;
}

IoStatus Socket::recv_exact(std::span<std::uint8_t> out, int timeout_ms,
                            const std::atomic<bool>* cancel) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms < 0 ? 0 : timeout_ms);
  std::size_t got = 0;
  while (got < out.size()) {
    if (cancel && cancel->load()) return IoStatus::Timeout;
    int slice = 100;
    if (timeout_ms >= 0) {
      const int left = remaining_ms(deadline);
      if (left == 0) return IoStatus::Timeout;
      slice = std::min(slice, left);
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, slice);
    if (rc == 0) continue;
    if (rc < 0) {
      if (errno == EINTR) continue;
      return IoStatus::Error;
    }
    const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) return IoStatus::Eof;
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      return IoStatus::Error;
    }
    got += static_cast<std::size_t>(n);
  }
  return IoStatus::Ok;
}

Socket connect_tcp(const Endpoint& ep, int timeout_ms) {
  AddrInfo ai;
  resolve(ep, false, ai);
  std::string last = "no address";
  for (addrinfo* a = ai.list; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_NONBLOCK | SOCK_CLOEXEC, a->ai_protocol));
    if (!s.valid()) continue;
    int fd_ok = 0;
    if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) == 0) {
      fd_ok = 1;
    } else if (errno == EINPROGRESS) {
      pollfd pfd{s.fd(), POLLOUT, 0};
      if (::poll(&pfd, 1, timeout_ms) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        getsockopt(pfd.fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err == 0) {
          fd_ok = 1;
        } else {
          last = std::strerror(err);
        }
      } else {
        last = "connect timed out";
      }
    } else {
      last = std::strerror(errno);
    }
    if (fd_ok) {
      const int one = 1;
      setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
  }
  throw Error(ErrorCategory::Io, "cannot connect to " + ep.str() + ": " + last);
}

Listener::Listener(const Endpoint& ep) {
  AddrInfo ai;
  resolve(ep, true, ai);
  std::string last = "no address";
  for (addrinfo* a = ai.list; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      fd_ = fd;
      sockaddr_storage addr{};
      socklen_t len = sizeof addr;
      getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
      port_ = addr.ss_family == AF_INET6
                  ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                  : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
      return;
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  throw Error(ErrorCategory::Io, "cannot listen on " + ep.str() + ": " + last);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::optional<Socket> Listener::accept(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  if (::poll(&pfd, 1, timeout_ms) != 1) return std::nullopt;
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  const int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

ReadResult read_message(Socket& sock, int timeout_ms, const std::atomic<bool>* cancel) {
  ReadResult res;
  std::array<std::uint8_t, kWireHeaderBytes> head{};
  auto status = sock.recv_exact(head, timeout_ms, cancel);
  if (status != IoStatus::Ok) {
    res.outcome = status == IoStatus::Eof       ? ReadOutcome::Eof
                  : status == IoStatus::Timeout ? ReadOutcome::Timeout
                                                : ReadOutcome::Error;
    return res;
  }
  WireHeader h;
  try {
    h = parse_wire_header(head);
  } catch (const Error& e) {
    res.outcome = ReadOutcome::Garbage;
    res.detail = e.what();
    return res;
  }
  std::vector<std::uint8_t> rest(h.length + 4);
  status = sock.recv_exact(rest, timeout_ms < 0 ? 10000 : timeout_ms, cancel);
  if (status != IoStatus::Ok) {
    res.outcome = status == IoStatus::Timeout ? ReadOutcome::Timeout : ReadOutcome::Error;
    return res;
  }
  std::span<const std::uint8_t> payload(rest.data(), h.length);
  BeReader crc(std::span<const std::uint8_t>(rest).subspan(h.length));
  if (!wire_crc_matches(h, payload, crc.get<std::uint32_t>())) {
    res.outcome = ReadOutcome::BadCrc;
    res.detail = "CRC mismatch";
    return res;
  }
  rest.resize(h.length);
  res.outcome = ReadOutcome::Message;
  res.message = Message{h.type, std::move(rest)};
  return res;
}

IoStatus write_message(Socket& sock, MessageType type, std::span<const std::uint8_t> payload,
                       int timeout_ms) {
  const auto bytes = encode_message(type, payload);
  return sock.send_all(bytes, timeout_ms);
}

}  // namespace motormon
