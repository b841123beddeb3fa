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

#include "tapseg/service/server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <cstdlib>

#include "httplib.h"
#include "tapseg/core/error.hpp"
#include "tapseg/io/image_io.hpp"
#include "tapseg/segmenters/socket_segmenter.hpp"

namespace tapseg::service {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfiguration:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kCapability:
    case ErrorCode::kDecode:
    case ErrorCode::kIo:
      return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kState:
    case ErrorCode::kOrdering:
      return 409;
    case ErrorCode::kEmptyRegion: return 422;
    default: return 500;
  }
}

ServiceConfig service_config_from_json(const json& doc) {
  ServiceConfig c;
  try {
    if (doc.contains("service")) {
      const json& s = doc.at("service");
      c.host = s.value("host", c.host);
      c.port = s.value("port", c.port);
      if (s.contains("results_root") && !s["results_root"].is_null())
        c.results_root = s["results_root"].get<std::string>();
      c.decode_command = s.value("decode_command", c.decode_command);
      c.worker_threads = s.value("worker_threads", c.worker_threads);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfiguration, std::string("service: ") + e.what());
  }
  if (const char* host = std::getenv("TAPSEG_SERVICE_HOST"); host && *host) c.host = host;
  if (const char* port = std::getenv("TAPSEG_SERVICE_PORT"); port && *port) {
    char* end = nullptr;
    const long p = std::strtol(port, &end, 10);
    require(*end == '\0', ErrorCode::kConfiguration, "TAPSEG_SERVICE_PORT is not a number: " + std::string(port));
    c.port = static_cast<int>(p);
  }
  require(c.port >= 0 && c.port <= 65535, ErrorCode::kConfiguration,
          "service.port out of range: " + std::to_string(c.port));
  require(c.worker_threads >= 2, ErrorCode::kConfiguration, "service.worker_threads must be >= 2");
  return c;
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) {
  reply(res, http_status(e.code()),
        {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}});
}

json parse_body(const httplib::Request& req) {
  try {
    return req.body.empty() ? json::object() : json::parse(req.body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

std::int64_t int_param(const httplib::Request& req, const std::string& name, std::int64_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kInvalidArgument, "query parameter " + name + " is not an integer: '" + v + "'");
}

template <typename Handler>
httplib::Server::Handler guarded(Handler h) {
  return [h](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      reply_error(res, e);
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
    }
  };
}

std::vector<segmenters::PromptBundle> bundles_from(const json& body) {
  std::vector<segmenters::PromptBundle> out;
  if (body.contains("prompts")) {
    require(body["prompts"].is_array(), ErrorCode::kInvalidArgument, "prompts: expected an array");
    for (const json& p : body["prompts"]) out.push_back(segmenters::prompt_from_json(p));
  } else {
    out.push_back(segmenters::prompt_from_json(body));
  }
  return out;
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      sessions_(std::make_unique<SessionManager>(ManagerOptions{config_.results_root, config_.decode_command})),
      server_(std::make_unique<httplib::Server>()) {
  const int threads = config_.worker_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  routes();
}

Service::~Service() { stop(); }

void Service::routes() {
  auto& s = *server_;
  SessionManager* mgr = sessions_.get();

  s.Get("/health", guarded([mgr](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"sessions", mgr->size()}});
  }));

  s.Post("/sessions", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    const std::string id = mgr->create(parse_body(req));
    reply(res, 201, {{"session_id", id}, {"state", to_string(mgr->get(id)->state())}});
  }));

  s.Get(R"(/sessions/([^/]+))", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, mgr->get(req.matches[1])->status());
  }));

  s.Post(R"(/sessions/([^/]+)/prompts)", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    auto session = mgr->get(req.matches[1]);
    std::future<PromptAck> ack = session->submit_prompt(bundles_from(parse_body(req)));
    if (ack.wait_for(std::chrono::seconds(30)) != std::future_status::ready) {
      reply(res, 202, {{"status", "queued"}, {"state", to_string(session->state())}});
      return;
    }
    const PromptAck a = ack.get();
    reply(res, 200,
          {{"instance_ids", a.instance_ids}, {"frame_index", a.frame_index}, {"state", to_string(session->state())}});
  }));

  s.Post(R"(/sessions/([^/]+)/control)", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    require(body.contains("verb") && body["verb"].is_string(), ErrorCode::kInvalidArgument,
            "control: expected {\"verb\": \"pause\" | \"resume\" | \"stop\"}");
    const SessionState st = mgr->get(req.matches[1])->control(body["verb"].get<std::string>());
    reply(res, 200, {{"state", to_string(st)}});
  }));

  s.Post(R"(/sessions/([^/]+)/frames)", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    auto session = mgr->get(req.matches[1]);
    require(req.has_param("index"), ErrorCode::kInvalidArgument, "frames: the index parameter is required");
    const std::int64_t index = int_param(req, "index", 0);
    const double ts = static_cast<double>(int_param(req, "timestamp_ms", index * 40));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
    session->push_frame(io::decode_frame_png({bytes, req.body.size()}, index, ts));
    reply(res, 202, {{"accepted", index}});
  }));

  s.Post(R"(/sessions/([^/]+)/frames/end)", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    auto session = mgr->get(req.matches[1]);
    session->close_input();
    reply(res, 200, {{"state", to_string(session->state())}});
  }));

  s.Get(R"(/sessions/([^/]+)/events)", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Session> session = mgr->get(req.matches[1]);
    const std::int64_t after = int_param(req, "after", -1);
    const bool follow = int_param(req, "follow", 1) != 0;
    auto cursor = std::make_shared<std::int64_t>(after);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "application/x-ndjson", [session, cursor, follow](std::size_t, httplib::DataSink& sink) {
          const EventBatch batch =
              session->events_after(*cursor, follow ? std::chrono::milliseconds(200) : std::chrono::milliseconds(0));
          for (const std::string& line : batch.lines) {
            const std::string chunk = line + "\n";
            if (!sink.write(chunk.data(), chunk.size())) return false;
          }
          *cursor = batch.last_seq;
          if (batch.complete || (!follow && batch.lines.empty())) sink.done();
          return true;
        });
  }));
}

int Service::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
    require(port_ > 0, ErrorCode::kIo, "cannot bind " + config_.host);
  } else {
    require(server_->bind_to_port(config_.host, config_.port), ErrorCode::kIo,
            "cannot bind " + config_.host + ":" + std::to_string(config_.port) + " (address in use?)");
    port_ = config_.port;
  }
  return port_;
}

void Service::serve() { server_->listen_after_bind(); }

int Service::start() {
  const int p = bind();
  thread_ = std::thread([this] { serve(); });
  server_->wait_until_ready();
  return p;
}

void Service::stop() {
  sessions_->shutdown();
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace tapseg::service
