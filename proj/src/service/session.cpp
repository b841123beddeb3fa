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

#include "tapseg/service/session.hpp"

#include <algorithm>

#include "tapseg/core/error.hpp"
#include "tapseg/segmenters/socket_segmenter.hpp"
#include "tapseg/synth/scene.hpp"

namespace tapseg::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kAwaitingPrompt: return "awaiting_prompt";
    case SessionState::kRunning: return "running";
    case SessionState::kPaused: return "paused";
    case SessionState::kFinished: return "finished";
    case SessionState::kFailed: return "failed";
  }
  return "unknown";
}

namespace {

bool terminal(SessionState s) { return s == SessionState::kFinished || s == SessionState::kFailed; }

bool needs_prompt(const pipeline::InitSpec& init) {
  return (init.mode == pipeline::InitMode::kPoints && init.points.empty()) ||
         (init.mode == pipeline::InitMode::kBox && init.boxes.empty());
}

// Turns the first prompt submission into an initialisation spec.
pipeline::InitSpec init_from_bundles(const std::vector<segmenters::PromptBundle>& bundles) {
  require(!bundles.empty(), ErrorCode::kInvalidArgument, "prompt submission is empty");
  pipeline::InitSpec init;
  const bool text = std::any_of(bundles.begin(), bundles.end(), [](const auto& b) { return b.text.has_value(); });
  const bool box = std::any_of(bundles.begin(), bundles.end(), [](const auto& b) { return b.box.has_value(); });
  if (text) {
    require(bundles.size() == 1 && !box && bundles[0].positive_points.empty(), ErrorCode::kInvalidArgument,
            "a text prompt must be submitted on its own");
    init.mode = pipeline::InitMode::kText;
    init.text = *bundles[0].text;
    return init;
  }
  if (box) {
    init.mode = pipeline::InitMode::kBox;
    for (const auto& b : bundles) {
      require(b.box && b.positive_points.empty(), ErrorCode::kInvalidArgument,
              "initial prompts must be all boxes or all clicks");
      init.boxes.push_back(*b.box);
    }
    return init;
  }
  init.mode = pipeline::InitMode::kPoints;
  InstanceId next = 1;
  for (const auto& b : bundles) {
    require(!b.positive_points.empty(), ErrorCode::kInvalidArgument, "prompt without points");
    InstanceId id = b.instance_id;
    if (id == 0) {
      while (init.points.count(next)) ++next;
      id = next;
    }
    require(!init.points.count(id), ErrorCode::kInvalidArgument,
            "instance " + std::to_string(id) + " prompted twice");
    init.points[id] = b.positive_points;
  }
  return init;
}

json error_json(const Error& e) { return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}; }

}  // namespace

Session::Session(std::string id, pipeline::PipelineConfig config, SessionSource source,
                 std::optional<fs::path> results_dir)
    : id_(std::move(id)), config_(std::move(config)), source_(std::move(source)) {
  config_.validate();
  tracker_ = pipeline::make_tracker(config_.tracker, {source_.motion});
  segmenter_ = pipeline::make_segmenter(config_.segmenter);
  // Builds once up front so capability errors surface at creation.
  pipeline_ = std::make_unique<pipeline::Pipeline>(config_, tracker_, segmenter_);
  if (results_dir) {
    fs::create_directories(*results_dir);
    writer_.emplace(*results_dir, false);
  }
  state_ = needs_prompt(config_.init) ? SessionState::kAwaitingPrompt : SessionState::kRunning;
  thread_ = std::thread([this] { worker(); });
}

Session::~Session() {
  {
    std::lock_guard lock(mutex_);
    stop_requested_ = true;
    input_closed_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

SessionState Session::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::int64_t Session::dropped_locked() const {
  return source_.mode == InputMode::kPull ? source_.source->dropped() : dropped_;
}

json Session::status() const {
  std::lock_guard lock(mutex_);
  return {{"session_id", id_},
          {"state", to_string(state_)},
          {"frame_cursor", frame_cursor_ < 0 ? json(nullptr) : json(frame_cursor_)},
          {"events", events_.size()},
          {"dropped_count", dropped_locked()},
          {"error", error_ ? json(*error_) : json(nullptr)},
          {"config", pipeline::to_json(config_)}};
}

std::future<PromptAck> Session::submit_prompt(std::vector<segmenters::PromptBundle> bundles) {
  PromptJob job{std::move(bundles), {}};
  std::future<PromptAck> out = job.done.get_future();
  std::lock_guard lock(mutex_);
  if (state_ != SessionState::kAwaitingPrompt && state_ != SessionState::kRunning) {
    job.done.set_exception(std::make_exception_ptr(
        Error(ErrorCode::kState, "session " + id_ + " is " + std::string(to_string(state_)) +
                                     "; prompts need awaiting_prompt or running")));
    return out;
  }
  prompts_.push_back(std::move(job));
  cv_.notify_all();
  return out;
}

SessionState Session::control(std::string_view verb) {
  std::unique_lock lock(mutex_);
  const auto illegal = [&] {
    fail(ErrorCode::kState, "cannot " + std::string(verb) + " session " + id_ + " in state " +
                                std::string(to_string(state_)));
  };
  if (verb == "pause") {
    if (state_ != SessionState::kRunning) illegal();
    state_ = SessionState::kPaused;
  } else if (verb == "resume") {
    if (state_ != SessionState::kPaused) illegal();
    state_ = SessionState::kRunning;
  } else if (verb == "stop") {
    if (terminal(state_)) illegal();
    stop_requested_ = true;
    input_closed_ = true;
    cv_.notify_all();
    cv_.wait(lock, [&] { return worker_done_; });
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown control verb '" + std::string(verb) + "'");
  }
  cv_.notify_all();
  return state_;
}

EventBatch Session::events_after(std::int64_t after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto first = static_cast<std::size_t>(std::max<std::int64_t>(after + 1, 0));
  cv_.wait_for(lock, timeout, [&] { return events_.size() > first || worker_done_; });
  EventBatch out;
  out.last_seq = after;
  for (std::size_t i = first; i < events_.size(); ++i) out.lines.push_back(events_[i]);
  if (!out.lines.empty()) out.last_seq = static_cast<std::int64_t>(events_.size()) - 1;
  out.complete = worker_done_ && events_.size() <= static_cast<std::size_t>(out.last_seq + 1);
  return out;
}

void Session::push_frame(Frame frame) {
  std::lock_guard lock(mutex_);
  require(source_.mode != InputMode::kPull, ErrorCode::kCapability,
          "session " + id_ + " reads its own source; frames cannot be pushed");
  require(!input_closed_ && !terminal(state_), ErrorCode::kState, "session " + id_ + " input is closed");
  if (source_.mode == InputMode::kLive && !inbox_.empty()) {
    dropped_ += static_cast<std::int64_t>(inbox_.size());
    inbox_.clear();
  }
  inbox_.push_back(std::move(frame));
  cv_.notify_all();
}

void Session::close_input() {
  std::lock_guard lock(mutex_);
  input_closed_ = true;
  cv_.notify_all();
}

std::optional<Frame> Session::next_frame() {
  if (source_.mode == InputMode::kPull) {
    {
      std::lock_guard lock(mutex_);
      if (stop_requested_) return std::nullopt;
    }
    return source_.source->next();
  }
  std::unique_lock lock(mutex_);
  while (true) {
    if (stop_requested_) return std::nullopt;
    if (state_ == SessionState::kPaused) {
      cv_.wait(lock);
      continue;
    }
    if (!inbox_.empty()) break;
    if (input_closed_) return std::nullopt;
    if (!prompts_.empty() && state_ == SessionState::kRunning) {
      lock.unlock();
      apply_prompts();
      lock.lock();
      continue;
    }
    cv_.wait(lock);
  }
  Frame f = std::move(inbox_.front());
  inbox_.pop_front();
  return f;
}

void Session::emit(json event) {
  std::lock_guard lock(mutex_);
  event["v"] = kEventSchemaVersion;
  event["seq"] = events_.size();
  events_.push_back(event.dump());
  cv_.notify_all();
}

void Session::publish(const pipeline::FrameResult& result, const Frame& frame) {
  if (writer_) (*writer_)(result, frame);
  json event = pipeline::to_json(result);
  event["type"] = "frame";
  {
    std::lock_guard lock(mutex_);
    frame_cursor_ = result.frame_index;
    event["dropped_count"] = dropped_locked();
  }
  emit(std::move(event));
}

bool Session::start_from_prompt(const Frame& first) {
  while (true) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return stop_requested_ || !prompts_.empty(); });
    if (stop_requested_) return false;
    PromptJob job = std::move(prompts_.front());
    prompts_.pop_front();
    lock.unlock();
    try {
      pipeline::PipelineConfig config = config_;
      config.init = init_from_bundles(job.bundles);
      auto pipe = std::make_unique<pipeline::Pipeline>(config, tracker_, segmenter_);
      const pipeline::FrameResult result = pipe->initialize(first);
      pipeline_ = std::move(pipe);
      {
        std::lock_guard relock(mutex_);
        config_ = std::move(config);
        if (state_ == SessionState::kAwaitingPrompt) state_ = SessionState::kRunning;
      }
      job.done.set_value({pipeline_->instance_ids(), first.index()});
      publish(result, first);
      return true;
    } catch (...) {
      job.done.set_exception(std::current_exception());
    }
  }
}

void Session::apply_prompts() {
  std::deque<PromptJob> jobs;
  {
    std::lock_guard lock(mutex_);
    jobs.swap(prompts_);
  }
  for (PromptJob& job : jobs) {
    try {
      require(!job.bundles.empty(), ErrorCode::kInvalidArgument, "prompt submission is empty");
      PromptAck ack{{}, pipeline_->current_frame_index()};
      for (auto& b : job.bundles) ack.instance_ids.push_back(pipeline_->add_instance(b));
      job.done.set_value(std::move(ack));
    } catch (...) {
      job.done.set_exception(std::current_exception());
    }
  }
}

void Session::worker() {
  std::int64_t attempted = -1;
  std::optional<json> error_event;
  std::int64_t frames = 0;
  try {
    std::optional<Frame> first = next_frame();
    if (first) {
      attempted = first->index();
      bool started = true;
      if (state() == SessionState::kAwaitingPrompt) {
        started = start_from_prompt(*first);
      } else {
        const pipeline::FrameResult r = pipeline_->initialize(*first);
        publish(r, *first);
      }
      if (started) {
        ++frames;
        while (true) {
          {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return stop_requested_ || state_ != SessionState::kPaused; });
            if (stop_requested_) break;
          }
          apply_prompts();
          std::optional<Frame> f = next_frame();
          if (!f) break;
          attempted = f->index();
          const pipeline::FrameResult r = pipeline_->process_frame(*f);
          publish(r, *f);
          ++frames;
        }
      }
    }
  } catch (const Error& e) {
    error_event = json{{"type", "error"}, {"frame_index", attempted}, {"error", error_json(e)}};
  } catch (const std::exception& e) {
    error_event = json{{"type", "error"},
                       {"frame_index", attempted},
                       {"error", {{"code", "internal"}, {"message", e.what()}}}};
  }

  std::deque<PromptJob> orphaned;
  SessionState final_state = error_event ? SessionState::kFailed : SessionState::kFinished;
  if (error_event) {
    std::lock_guard lock(mutex_);
    error_ = (*error_event)["error"]["message"].get<std::string>();
  }
  if (error_event) emit(*error_event);
  emit({{"type", "end"}, {"state", to_string(final_state)}, {"frames", frames}});
  {
    std::lock_guard lock(mutex_);
    state_ = final_state;
    worker_done_ = true;
    input_closed_ = true;
    orphaned.swap(prompts_);
  }
  for (PromptJob& job : orphaned)
    job.done.set_exception(std::make_exception_ptr(
        Error(ErrorCode::kState, "session " + id_ + " ended before the prompt was applied")));
  cv_.notify_all();
}

SessionManager::SessionManager(ManagerOptions options) : options_(std::move(options)) {}

SessionManager::~SessionManager() { shutdown(); }

SessionSource SessionManager::open_source(const json& d) const {
  require(d.is_object(), ErrorCode::kConfiguration, "source: expected an object");
  SessionSource out;
  if (d.contains("live")) {
    out.mode = InputMode::kLive;
    return out;
  }
  if (d.contains("upload")) {
    out.mode = InputMode::kUpload;
    return out;
  }
  if (d.contains("synthetic")) {
    const json& what = d["synthetic"];
    synth::Scene scene;
    try {
      const std::uint64_t seed = d.value("seed", std::uint64_t{0});
      if (what.is_object()) {
        scene = synth::scene_from_json(what);
      } else {
        const std::string name = what.get<std::string>();
        if (name == "moving_disk") scene = synth::moving_disk_scene(seed);
        else if (name == "occlusion") scene = synth::occlusion_scene(seed);
        else if (name == "two_object") scene = synth::two_object_scene(seed);
        else if (name == "panning") scene = synth::panning_scene(2.0, 1.0, 100, seed);
        else fail(ErrorCode::kConfiguration, "source.synthetic: unknown scene '" + name + "'");
      }
      if (d.contains("frames")) scene.num_frames = d["frames"].get<std::int64_t>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfiguration, std::string("source.synthetic: ") + e.what());
    }
    require(scene.num_frames >= 1, ErrorCode::kConfiguration, "source.frames must be >= 1");
    out.motion = synth::motion_field(scene);
    out.source = std::make_unique<pipeline::SyntheticSource>(std::move(scene));
    return out;
  }
  if (d.contains("path")) {
    require(d["path"].is_string(), ErrorCode::kConfiguration, "source.path: expected a string");
    out.source = pipeline::open_source(d["path"].get<std::string>(), options_.decode_command);
    if (const auto* syn = dynamic_cast<const pipeline::SyntheticSource*>(out.source.get()))
      out.motion = synth::motion_field(syn->scene());
    return out;
  }
  fail(ErrorCode::kConfiguration, "source: expected one of path, synthetic, live, upload");
}

std::string SessionManager::create(const json& request) {
  require(request.is_object(), ErrorCode::kConfiguration, "session request: expected an object");
  const pipeline::PipelineConfig config = pipeline::config_from_json(request.value("config", json::object()));
  SessionSource source = open_source(request.value("source", json::object()));
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(++counter_);
  }
  std::optional<fs::path> dir;
  if (options_.results_root) dir = *options_.results_root / id;
  auto session = std::make_shared<Session>(id, config, std::move(source), dir);
  std::lock_guard lock(mutex_);
  sessions_.emplace(id, std::move(session));
  return id;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "unknown session '" + id + "'");
  return it->second;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void SessionManager::shutdown() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : sessions_) all.push_back(s);
  }
  for (auto& s : all) {
    try {
      s->control("stop");
    } catch (const Error&) {
      // already finished
    }
  }
}

}  // namespace tapseg::service
