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

#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tapseg/core/types.hpp"
#include "tapseg/synth/scene.hpp"

namespace tapseg::pipeline {

// Pull-based frame stream. next() returns nullopt at end of stream.
class VideoSource {
 public:
  virtual ~VideoSource() = default;
  virtual std::optional<Frame> next() = 0;
  virtual std::string describe() const = 0;
  // Frames discarded because the consumer fell behind (live sources).
  virtual std::int64_t dropped() const { return 0; }
};

class MemorySource : public VideoSource {
 public:
  explicit MemorySource(std::vector<Frame> frames) : frames_(std::move(frames)) {}
  std::optional<Frame> next() override;
  std::string describe() const override { return "memory"; }

 private:
  std::vector<Frame> frames_;
  std::size_t pos_ = 0;
};

// frame_%06d.png files; the number in the name becomes the frame index.
class ImageDirectorySource : public VideoSource {
 public:
  // Errors: kIo when the directory is missing, kInvalidArgument when it
  // holds no frames.
  explicit ImageDirectorySource(const std::filesystem::path& dir, double frame_interval_ms = 40.0);
  std::optional<Frame> next() override;
  std::string describe() const override { return dir_.string(); }
  std::size_t size() const { return files_.size(); }

 private:
  std::filesystem::path dir_;
  double interval_;
  std::vector<std::pair<std::int64_t, std::filesystem::path>> files_;
  std::size_t pos_ = 0;
};

// Container files decoded by an external program that writes concatenated
// binary PPM (P6) images to stdout. "{input}" in the command is replaced by
// the quoted file path.
class DecodeCommandSource : public VideoSource {
 public:
  static constexpr const char* kDefaultCommand =
      "ffmpeg -v error -i {input} -f image2pipe -vcodec ppm -";

  DecodeCommandSource(const std::filesystem::path& file, std::string command = kDefaultCommand,
                      double frame_interval_ms = 40.0);
  ~DecodeCommandSource() override;
  std::optional<Frame> next() override;
  std::string describe() const override { return file_.string(); }

 private:
  std::filesystem::path file_;
  FILE* pipe_ = nullptr;
  double interval_;
  std::int64_t index_ = 0;
};

// Renders a synthetic scene frame by frame.
class SyntheticSource : public VideoSource {
 public:
  explicit SyntheticSource(synth::Scene scene) : scene_(std::move(scene)) {}
  std::optional<Frame> next() override;
  std::string describe() const override { return "synthetic"; }
  const synth::Scene& scene() const { return scene_; }

 private:
  synth::Scene scene_;
  std::int64_t t_ = 0;
};

// Frames pushed by a producer thread. Holds at most one pending frame: a
// newer push replaces an unconsumed one and counts as a drop.
class LiveSource : public VideoSource {
 public:
  void push(Frame frame);
  // Ends the stream once the pending frame (if any) is consumed.
  void close();
  std::optional<Frame> next() override;
  std::string describe() const override { return "live"; }
  std::int64_t dropped() const override;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::optional<Frame> pending_;
  bool closed_ = false;
  std::int64_t dropped_ = 0;
};

// Picks a source for a path: a directory of frames, a scene .json, or any
// other file through the decode command.
std::unique_ptr<VideoSource> open_source(const std::filesystem::path& path,
                                         const std::string& decode_command =
                                             DecodeCommandSource::kDefaultCommand);

}  // namespace tapseg::pipeline
