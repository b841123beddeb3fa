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

#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "tapseg/core/error.hpp"
#include "tapseg/service/session.hpp"

namespace httplib {
class Server;
}

namespace tapseg::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> results_root;
  std::string decode_command = pipeline::DecodeCommandSource::kDefaultCommand;
  int worker_threads = 16;
};

// Reads the "service" section (host, port, results_root, decode_command,
// worker_threads) when present, then applies TAPSEG_SERVICE_HOST and
// TAPSEG_SERVICE_PORT from the environment. Errors: kConfiguration.
ServiceConfig service_config_from_json(const nlohmann::json& doc);

// HTTP front end:
//   GET  /health
//   POST /sessions                       -> {"session_id", "state"}
//   GET  /sessions/{id}
//   POST /sessions/{id}/prompts          bundle or {"prompts": [bundle...]}
//   POST /sessions/{id}/control          {"verb": "pause" | "resume" | "stop"}
//   GET  /sessions/{id}/events?after=N&follow=1   chunked NDJSON
//   POST /sessions/{id}/frames?index=N   PNG body (live and upload sources)
//   POST /sessions/{id}/frames/end
// Errors come back as {"error": {"code", "message"}} with a 4xx/5xx status.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  // Errors: kIo when the address cannot be bound.
  int bind();
  // Blocks until stop().
  void serve();
  // bind() plus serve() on a background thread.
  int start();
  // Stops sessions (in-flight frames finish), then the listener.
  void stop();

  int port() const { return port_; }
  SessionManager& sessions() { return *sessions_; }

 private:
  void routes();

  ServiceConfig config_;
  std::unique_ptr<SessionManager> sessions_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// HTTP status for a library error code.
int http_status(ErrorCode code);

}  // namespace tapseg::service
