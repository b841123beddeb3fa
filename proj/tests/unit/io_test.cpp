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

#include <filesystem>
#include <random>
#include <thread>

#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "tapseg/core/error.hpp"
#include "tapseg/io/base64.hpp"
#include "tapseg/io/frame_codec.hpp"
#include "tapseg/io/image_io.hpp"
#include "tapseg/io/line_channel.hpp"
#include "tapseg/synth/scene.hpp"
#include "test_util.hpp"

namespace tapseg::io {
namespace {

namespace fs = std::filesystem;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tapseg_io_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Base64, KnownVectors) {
  const auto enc = [](std::string_view s) {
    return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foo"), "Zm9v");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
  const auto dec = base64_decode("Zm9vYg==");
  EXPECT_EQ(std::string(dec.begin(), dec.end()), "foob");
  EXPECT_EQ(code_of([] { base64_decode("Zm9*"); }), ErrorCode::kDecode);
}

TEST(Base64, RandomRoundTrip) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 200; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
}

TEST(FrameCodec, JsonRoundTrip) {
  const Frame f = synth::moving_disk_scene().render(7);
  const Frame g = frame_from_json(frame_to_json(f));
  EXPECT_EQ(g.index(), 7);
  EXPECT_DOUBLE_EQ(g.timestamp_ms(), f.timestamp_ms());
  EXPECT_EQ(g.height(), f.height());
  EXPECT_EQ(g.width(), f.width());
  EXPECT_TRUE(std::equal(f.rgb().begin(), f.rgb().end(), g.rgb().begin(), g.rgb().end()));
  const std::vector<Point> pts = {{1.5, 2.25}, {0.0, 9.75}};
  EXPECT_EQ(points_from_json(points_to_json(pts)), pts);
}

TEST(FrameCodec, SharedFilePath) {
  const Frame f = synth::moving_disk_scene().render(3);
  const auto path = scratch("shared.png");
  write_frame_png(path, f);
  const Frame g = frame_from_json({{"path", path.string()}, {"index", 3}});
  EXPECT_TRUE(std::equal(f.rgb().begin(), f.rgb().end(), g.rgb().begin(), g.rgb().end()));
  EXPECT_EQ(g.index(), 3);
}

TEST(ImageIo, PngRoundTrip) {
  const Frame f = synth::two_object_scene().render(35);
  const auto bytes = encode_frame_png(f);
  const Frame g = decode_frame_png(bytes, 35, 1400.0);
  EXPECT_TRUE(std::equal(f.rgb().begin(), f.rgb().end(), g.rgb().begin(), g.rgb().end()));
  EXPECT_EQ(code_of([] { std::vector<std::uint8_t> junk(40, 7); decode_frame_png(junk, 0, 0); }),
            ErrorCode::kDecode);
  EXPECT_EQ(code_of([] { read_frame_png("/nonexistent/none.png", 0, 0); }), ErrorCode::kIo);
}

TEST(ImageIo, MaskRoundTrips) {
  std::mt19937_64 rng(5);
  const BinaryMask m = testing::random_mask_of(rng, {31, 17}, 0.4);
  const auto bin = scratch("mask.png");
  write_binary_mask_png(bin, m);
  EXPECT_EQ(read_binary_mask_png(bin), m);

  const auto gt = synth::two_object_scene().ground_truth(40);
  const auto pal = scratch("palette.png");
  write_palette_mask_png(pal, gt);
  const auto back = read_palette_mask_png(pal, 40);
  ASSERT_EQ(back.masks().size(), 2u);
  EXPECT_EQ(back.at(1), gt.at(1));
  EXPECT_EQ(back.at(2), gt.at(2));
}

TEST(ImageIo, RgbMaskFallsBackToDistinctColors) {
  std::vector<std::uint8_t> rgb(4 * 4 * 3, 0);
  auto paint = [&](int r, int c, std::uint8_t R, std::uint8_t G) {
    rgb[(r * 4 + c) * 3] = R;
    rgb[(r * 4 + c) * 3 + 1] = G;
  };
  paint(0, 3, 200, 0);
  paint(1, 0, 0, 200);
  paint(2, 2, 200, 0);
  const auto path = scratch("rgbmask.png");
  write_frame_png(path, Frame(0, 0.0, 4, 4, rgb));
  const auto set = read_palette_mask_png(path, 0);
  ASSERT_EQ(set.masks().size(), 2u);
  EXPECT_EQ(set.at(1).count(), 2u);
  EXPECT_TRUE(set.at(1).at(0, 3));
  EXPECT_TRUE(set.at(2).at(1, 0));
}

TEST(LineChannel, PairExchangesMessages) {
  auto [a, b] = LineChannel::pair();
  std::thread echo([&b] {
    while (auto m = b.receive()) b.send({{"echo", *m}});
  });
  const auto big = std::string(300000, 'x');
  EXPECT_EQ(a.request({{"n", 1}}), (nlohmann::json{{"echo", {{"n", 1}}}}));
  EXPECT_EQ(a.request({{"s", big}})["echo"]["s"], big);
  a.close();
  echo.join();
}

TEST(LineChannel, TcpAndBadEndpoints) {
  LineListener listener("tcp:127.0.0.1:0");
  EXPECT_EQ(code_of([] { LineChannel::connect("http://x"); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { LineChannel::connect("unix:/nonexistent/dir/s.sock"); }), ErrorCode::kIo);
}

TEST(LineChannel, MalformedLineIsDecodeError) {
  int fds[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
  LineChannel reader(fds[0]);
  const std::string junk = "{not json\n{\"ok\":1}\npartial";
  ASSERT_EQ(::write(fds[1], junk.data(), junk.size()), static_cast<ssize_t>(junk.size()));
  ::close(fds[1]);
  EXPECT_EQ(code_of([&] { reader.receive(); }), ErrorCode::kDecode);
  EXPECT_EQ(reader.receive().value()["ok"], 1);
  EXPECT_EQ(code_of([&] { reader.receive(); }), ErrorCode::kDecode);
}

}  // namespace
}  // namespace tapseg::io
