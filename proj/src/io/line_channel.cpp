// Copyright 2026 The tapseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tapseg/io/line_channel.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "tapseg/core/error.hpp"

namespace tapseg::io {

namespace {

struct Endpoint {
  bool is_unix = false;
  std::string path;
  std::string host;
  std::string port;
};

Endpoint parse_endpoint(std::string_view text) {
  Endpoint ep;
  if (text.starts_with("unix:")) {
    ep.is_unix = true;
    ep.path = std::string(text.substr(5));
    require(!ep.path.empty() && ep.path.size() < sizeof(sockaddr_un::sun_path),
            ErrorCode::kConfiguration, "bad unix socket path in '" + std::string(text) + "'");
    return ep;
  }
  if (text.starts_with("tcp:")) {
    const auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    require(colon != std::string_view::npos, ErrorCode::kConfiguration,
            "tcp endpoint needs host:port");
    ep.host = std::string(rest.substr(0, colon));
    ep.port = std::string(rest.substr(colon + 1));
    return ep;
  }
  fail(ErrorCode::kConfiguration,
       "endpoint must start with unix: or tcp:, got '" + std::string(text) + "'");
}

std::string errno_text() { return std::strerror(errno); }

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

LineChannel::~LineChannel() { close(); }

LineChannel::LineChannel(LineChannel&& other) noexcept
    : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

LineChannel& LineChannel::operator=(LineChannel&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    buffer_ = std::move(other.buffer_);
    other.fd_ = -1;
  }
  return *this;
}

void LineChannel::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

LineChannel LineChannel::connect(std::string_view endpoint) {
  ignore_sigpipe();
  const Endpoint ep = parse_endpoint(endpoint);
  if (ep.is_unix) {
    const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    require(fd >= 0, ErrorCode::kIo, "socket: " + errno_text());
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, ep.path.c_str(), sizeof(addr.sun_path) - 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string why = errno_text();
      ::close(fd);
      fail(ErrorCode::kIo, "connect " + std::string(endpoint) + ": " + why);
    }
    return LineChannel(fd);
  }
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), ep.port.c_str(), &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kIo, "cannot resolve " + std::string(endpoint));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  require(fd >= 0, ErrorCode::kIo, "connect " + std::string(endpoint) + " failed");
  return LineChannel(fd);
}

std::pair<LineChannel, LineChannel> LineChannel::pair() {
  ignore_sigpipe();
  int fds[2];
  require(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0, ErrorCode::kIo,
          "socketpair: " + errno_text());
  return {LineChannel(fds[0]), LineChannel(fds[1])};
}

void LineChannel::send(const nlohmann::json& message) {
  require(fd_ >= 0, ErrorCode::kIo, "send on closed channel");
  std::string line = message.dump();
  line.push_back('\n');
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    require(n > 0, ErrorCode::kIo, "send: " + errno_text());
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<nlohmann::json> LineChannel::receive() {
  require(fd_ >= 0, ErrorCode::kIo, "receive on closed channel");
  while (true) {
    const auto newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      const std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      try {
        return nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kDecode, std::string("malformed message: ") + e.what());
      }
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    require(n >= 0, ErrorCode::kIo, "recv: " + errno_text());
    if (n == 0) {
      require(buffer_.empty(), ErrorCode::kDecode, "connection closed mid-message");
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json LineChannel::request(const nlohmann::json& message) {
  send(message);
  auto reply = receive();
  require(reply.has_value(), ErrorCode::kIo, "peer closed the connection");
  return *std::move(reply);
}

LineListener::LineListener(std::string_view endpoint) : endpoint_(endpoint) {
  ignore_sigpipe();
  const Endpoint ep = parse_endpoint(endpoint);
  if (ep.is_unix) {
    std::error_code ec;
    std::filesystem::remove(ep.path, ec);
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    require(fd_ >= 0, ErrorCode::kIo, "socket: " + errno_text());
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, ep.path.c_str(), sizeof(addr.sun_path) - 1);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string why = errno_text();
      close();
      fail(ErrorCode::kIo, "bind " + ep.path + ": " + why);
    }
    unix_path_ = ep.path;
  } else {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    require(fd_ >= 0, ErrorCode::kIo, "socket: " + errno_text());
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(std::stoi(ep.port)));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string why = errno_text();
      close();
      fail(ErrorCode::kIo, "bind " + std::string(endpoint) + ": " + why);
    }
  }
  require(::listen(fd_, 16) == 0, ErrorCode::kIo, "listen: " + errno_text());
}

LineListener::~LineListener() { close(); }

void LineListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
  if (!unix_path_.empty()) {
    std::error_code ec;
    std::filesystem::remove(unix_path_, ec);
    unix_path_.clear();
  }
}

LineChannel LineListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0 && errno == EINTR) continue;
    require(fd >= 0, ErrorCode::kIo, "accept: " + errno_text());
    return LineChannel(fd);
  }
}

}  // namespace tapseg::io
