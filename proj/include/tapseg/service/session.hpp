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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tapseg/pipeline/adapters.hpp"
#include "tapseg/pipeline/pipeline.hpp"

namespace tapseg::service {

inline constexpr int kEventSchemaVersion = 1;

enum class SessionState { kAwaitingPrompt, kRunning, kPaused, kFinished, kFailed };

std::string_view to_string(SessionState s);

struct PromptAck {
  std::vector<InstanceId> instance_ids;
  std::int64_t frame_index = 0;
};

struct EventBatch {
  std::vector<std::string> lines;  // serialized events, oldest first
  std::int64_t last_seq = -1;      // seq of the last line, or the cursor
  bool complete = false;           // terminal state and nothing left
};

enum class InputMode { kPull, kLive, kUpload };

// Where a session's frames come from. Pull sources are read by the worker;
// live and upload frames arrive through Session::push_frame.
struct SessionSource {
  InputMode mode = InputMode::kPull;
  std::unique_ptr<pipeline::VideoSource> source;        // kPull only
  std::shared_ptr<const trackers::MotionField> motion;  // synthetic only
};

// One pipeline driven by its own worker thread. Prompts and control verbs
// take effect between frames. Events carry "v", "type" ("frame", "error",
// "end") and a gapless per-session "seq".
class Session {
 public:
  // Errors: kConfiguration / kCapability from building the adapters.
  Session(std::string id, pipeline::PipelineConfig config, SessionSource source,
          std::optional<std::filesystem::path> results_dir);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  SessionState state() const;
  nlohmann::json status() const;

  // Awaiting a prompt: initialises the pipeline on the first frame from the
  // bundles. Running: adds each bundle as a new instance on the latest
  // frame. The future fails with kEmptyRegion (state unchanged) when a
  // prompt selects nothing and with kState in any other state.
  std::future<PromptAck> submit_prompt(std::vector<segmenters::PromptBundle> bundles);

  // pause | resume | stop. Errors: kState for an illegal transition,
  // kInvalidArgument for an unknown verb. Returns the resulting state; stop
  // waits for the in-flight frame.
  SessionState control(std::string_view verb);

  // Events with seq > after, waiting up to `timeout` for the first one.
  EventBatch events_after(std::int64_t after, std::chrono::milliseconds timeout) const;

  // Live sessions keep only the newest unconsumed frame and count the rest
  // as dropped; upload sessions queue every frame. Errors: kCapability for
  // pull sources, kState once input is closed.
  void push_frame(Frame frame);
  void close_input();

 private:
  struct PromptJob {
    std::vector<segmenters::PromptBundle> bundles;
    std::promise<PromptAck> done;
  };

  void worker();
  std::optional<Frame> next_frame();
  bool start_from_prompt(const Frame& first);
  void apply_prompts();
  void publish(const pipeline::FrameResult& result, const Frame& frame);
  void emit(nlohmann::json event);
  std::int64_t dropped_locked() const;

  std::string id_;
  pipeline::PipelineConfig config_;
  SessionSource source_;
  std::shared_ptr<const trackers::TrackerAdapter> tracker_;
  std::shared_ptr<const segmenters::SegmenterAdapter> segmenter_;
  std::optional<pipeline::ResultWriter> writer_;
  std::unique_ptr<pipeline::Pipeline> pipeline_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  SessionState state_ = SessionState::kAwaitingPrompt;
  bool stop_requested_ = false;
  bool worker_done_ = false;
  std::int64_t frame_cursor_ = -1;
  std::optional<std::string> error_;
  std::deque<PromptJob> prompts_;
  std::deque<Frame> inbox_;
  bool input_closed_ = false;
  std::int64_t dropped_ = 0;
  std::vector<std::string> events_;
  std::thread thread_;
};

struct ManagerOptions {
  std::optional<std::filesystem::path> results_root;
  std::string decode_command = pipeline::DecodeCommandSource::kDefaultCommand;
};

// Creates sessions from a request document:
//   {"config": {pipeline config sections},
//    "source": {"path": "..."} | {"synthetic": "moving_disk" | scene,
//               "seed": 0, "frames": 100} | {"live": true} | {"upload": true}}
class SessionManager {
 public:
  explicit SessionManager(ManagerOptions options = {});
  ~SessionManager();

  // Errors: kConfiguration for a bad config or source descriptor, kIo when
  // the source cannot be opened.
  std::string create(const nlohmann::json& request);
  // Errors: kNotFound.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::size_t size() const;
  // Stops every session, letting in-flight frames finish.
  void shutdown();

 private:
  SessionSource open_source(const nlohmann::json& descriptor) const;

  ManagerOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace tapseg::service
