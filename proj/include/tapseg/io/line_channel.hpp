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

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace tapseg::io {

// Newline-delimited JSON over a connected stream socket. Owns the fd.
class LineChannel {
 public:
  LineChannel() = default;
  explicit LineChannel(int fd) : fd_(fd) {}
  ~LineChannel();
  LineChannel(LineChannel&& other) noexcept;
  LineChannel& operator=(LineChannel&& other) noexcept;
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  // "unix:/path/to.sock" or "tcp:host:port".
  static LineChannel connect(std::string_view endpoint);
  // Connected pair of channels (for in-process adapters and tests).
  static std::pair<LineChannel, LineChannel> pair();

  bool valid() const { return fd_ >= 0; }
  void send(const nlohmann::json& message);
  // nullopt on orderly EOF.
  std::optional<nlohmann::json> receive();
  nlohmann::json request(const nlohmann::json& message);
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

// Listening socket for adapter servers; same endpoint syntax as connect().
class LineListener {
 public:
  explicit LineListener(std::string_view endpoint);
  ~LineListener();
  LineListener(const LineListener&) = delete;
  LineListener& operator=(const LineListener&) = delete;

  LineChannel accept();
  std::string endpoint() const { return endpoint_; }
  void close();

 private:
  int fd_ = -1;
  std::string endpoint_;
  std::string unix_path_;
};

}  // namespace tapseg::io
