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

#include "tapseg/pipeline/video_source.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include "tapseg/core/error.hpp"
#include "tapseg/io/image_io.hpp"

namespace tapseg::pipeline {

namespace fs = std::filesystem;

std::optional<Frame> MemorySource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  return frames_[pos_++];
}

ImageDirectorySource::ImageDirectorySource(const fs::path& dir, double frame_interval_ms)
    : dir_(dir), interval_(frame_interval_ms) {
  require(fs::is_directory(dir), ErrorCode::kIo, "no such frame directory: " + dir.string());
  static const std::regex pattern(R"(frame_(\d{6,})\.png)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      files_.emplace_back(std::stoll(m[1].str()), entry.path());
    }
  }
  std::sort(files_.begin(), files_.end());
  require(!files_.empty(), ErrorCode::kInvalidArgument,
          "no frame_NNNNNN.png files in " + dir.string());
}

std::optional<Frame> ImageDirectorySource::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  const auto& [index, path] = files_[pos_++];
  return io::read_frame_png(path, index, interval_ * static_cast<double>(index));
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// Reads one whitespace-delimited PPM header token, skipping comments.
bool header_token(FILE* f, std::string& token) {
  token.clear();
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      break;
    }
    c = std::fgetc(f);
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = std::fgetc(f);
  }
  return !token.empty();
}

}  // namespace

DecodeCommandSource::DecodeCommandSource(const fs::path& file, std::string command,
                                         double frame_interval_ms)
    : file_(file), interval_(frame_interval_ms) {
  require(fs::exists(file), ErrorCode::kIo, "no such video: " + file.string());
  const auto at = command.find("{input}");
  require(at != std::string::npos, ErrorCode::kConfiguration,
          "decode command must contain {input}");
  command.replace(at, 7, shell_quote(file.string()));
  pipe_ = ::popen(command.c_str(), "r");
  require(pipe_ != nullptr, ErrorCode::kIo, "cannot start decoder: " + command);
}

DecodeCommandSource::~DecodeCommandSource() {
  if (pipe_) ::pclose(pipe_);
}

std::optional<Frame> DecodeCommandSource::next() {
  if (!pipe_) return std::nullopt;
  std::string magic, w, h, maxval;
  if (!header_token(pipe_, magic)) {
    const int status = ::pclose(pipe_);
    pipe_ = nullptr;
    require(status == 0 || index_ > 0, ErrorCode::kDecode,
            "decoder produced no frames for " + file_.string());
    return std::nullopt;
  }
  require(magic == "P6", ErrorCode::kDecode, "decoder output is not binary PPM");
  require(header_token(pipe_, w) && header_token(pipe_, h) && header_token(pipe_, maxval),
          ErrorCode::kDecode, "truncated PPM header");
  require(maxval == "255", ErrorCode::kDecode, "only 8-bit PPM is supported");
  const int width = std::stoi(w);
  const int height = std::stoi(h);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  require(std::fread(rgb.data(), 1, rgb.size(), pipe_) == rgb.size(), ErrorCode::kDecode,
          "truncated frame " + std::to_string(index_));
  const std::int64_t index = index_++;
  return Frame(index, interval_ * static_cast<double>(index), height, width, std::move(rgb));
}

std::optional<Frame> SyntheticSource::next() {
  if (t_ >= scene_.num_frames) return std::nullopt;
  return scene_.render(t_++);
}

void LiveSource::push(Frame frame) {
  {
    std::lock_guard lock(mutex_);
    require(!closed_, ErrorCode::kState, "push on a closed live source");
    if (pending_) ++dropped_;
    pending_ = std::move(frame);
  }
  cv_.notify_all();
}

void LiveSource::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<Frame> LiveSource::next() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return pending_.has_value() || closed_; });
  if (!pending_) return std::nullopt;
  std::optional<Frame> out = std::move(pending_);
  pending_.reset();
  return out;
}

std::int64_t LiveSource::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

std::unique_ptr<VideoSource> open_source(const fs::path& path, const std::string& decode_command) {
  require(fs::exists(path), ErrorCode::kIo, "no such video: " + path.string());
  if (fs::is_directory(path)) return std::make_unique<ImageDirectorySource>(path);
  if (path.extension() == ".json") {
    std::ifstream in(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfiguration, path.string() + ": " + e.what());
    }
    return std::make_unique<SyntheticSource>(synth::scene_from_json(j));
  }
  return std::make_unique<DecodeCommandSource>(path, decode_command);
}

}  // namespace tapseg::pipeline
