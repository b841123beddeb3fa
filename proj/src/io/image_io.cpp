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

#include "tapseg/io/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

#include "tapseg/core/error.hpp"

namespace tapseg::io {

namespace {

struct Decoded {
  int height = 0;
  int width = 0;
  int color_type = 0;
  std::vector<std::uint8_t> pixels;  // rgb, or palette indices when paletted
};

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + count > reader->bytes.size()) png_error(png, "truncated png");
  std::memcpy(out, reader->bytes.data() + reader->offset, count);
  reader->offset += count;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void flush_noop(png_structp) {}

// libpng on this platform is built with unwind tables, so the error
// callback may throw straight through it.
void on_error(png_structp png, png_const_charp message) {
  throw Error(ErrorCode::kIo, std::string("png: ") + message);
}

void on_read_error(png_structp png, png_const_charp message) {
  throw Error(ErrorCode::kDecode, std::string("png: ") + message);
}

void on_warning(png_structp, png_const_charp) {}

// keep_palette: return palette indices instead of expanding to RGB.
Decoded decode(FILE* file, const MemoryReader* memory, bool keep_palette) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_read_error, on_warning);
  require(png != nullptr, ErrorCode::kIo, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_read_struct(png, info, nullptr); }
  } cleanup{&png, &info};

  if (file) {
    png_init_io(png, file);
  } else {
    png_set_read_fn(png, const_cast<MemoryReader*>(memory), read_from_memory);
  }
  png_read_info(png, info);
  Decoded out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  const bool palette = out.color_type == PNG_COLOR_TYPE_PALETTE && keep_palette;
  if (palette) {
    if (bit_depth < 8) png_set_packing(png);
  } else {
    if (out.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (out.color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (out.color_type == PNG_COLOR_TYPE_GRAY || out.color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    if (out.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  const std::size_t channels = palette ? 1 : 3;
  require(row_bytes == channels * out.width, ErrorCode::kDecode, "png: unexpected row layout");
  out.pixels.resize(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = out.pixels.data() + r * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  if (palette) out.color_type = PNG_COLOR_TYPE_PALETTE;
  else out.color_type = PNG_COLOR_TYPE_RGB;
  return out;
}

Decoded decode_file(const std::filesystem::path& path, bool keep_palette) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::unique_ptr<FILE, int (*)(FILE*)> closer(f, std::fclose);
  try {
    return decode(f, nullptr, keep_palette);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

// palette: nullptr for RGB output.
void encode(FILE* file, std::vector<std::uint8_t>* memory, int height, int width,
            const std::uint8_t* pixels, const std::vector<png_color>* palette) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  require(png != nullptr, ErrorCode::kIo, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_write_struct(png, info); }
  } cleanup{&png, &info};
  if (file) {
    png_init_io(png, file);
  } else {
    png_set_write_fn(png, memory, write_to_vector, flush_noop);
  }
  const int color_type = palette ? PNG_COLOR_TYPE_PALETTE : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    png_set_PLTE(png, info, palette->data(), static_cast<int>(palette->size()));
  }
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * (palette ? 1 : 3);
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels + r * row_bytes));
  }
  png_write_end(png, nullptr);
}

void encode_file(const std::filesystem::path& path, int height, int width,
                 const std::uint8_t* pixels, const std::vector<png_color>* palette) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  std::unique_ptr<FILE, int (*)(FILE*)> closer(f, std::fclose);
  encode(f, nullptr, height, width, pixels, palette);
}

png_color palette_color(std::int64_t id) {
  if (id == 0) return {0, 0, 0};
  // Golden-angle hue walk; distinct, stable colors per id.
  const double hue = std::fmod(static_cast<double>(id) * 137.508, 360.0) / 60.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const auto hi = static_cast<png_byte>(230);
  const auto lo = static_cast<png_byte>(40);
  const auto up = static_cast<png_byte>(lo + f * (hi - lo));
  const auto down = static_cast<png_byte>(hi - f * (hi - lo));
  switch (sector % 6) {
    case 0: return {hi, up, lo};
    case 1: return {down, hi, lo};
    case 2: return {lo, hi, up};
    case 3: return {lo, down, hi};
    case 4: return {up, lo, hi};
    default: return {hi, lo, down};
  }
}

}  // namespace

Frame read_frame_png(const std::filesystem::path& path, std::int64_t index, double timestamp_ms) {
  Decoded d = decode_file(path, false);
  return Frame(index, timestamp_ms, d.height, d.width, std::move(d.pixels));
}

void write_frame_png(const std::filesystem::path& path, const Frame& frame) {
  encode_file(path, frame.height(), frame.width(), frame.rgb().data(), nullptr);
}

Frame decode_frame_png(std::span<const std::uint8_t> bytes, std::int64_t index, double timestamp_ms) {
  MemoryReader reader{bytes, 0};
  Decoded d = decode(nullptr, &reader, false);
  return Frame(index, timestamp_ms, d.height, d.width, std::move(d.pixels));
}

std::vector<std::uint8_t> encode_frame_png(const Frame& frame) {
  std::vector<std::uint8_t> out;
  encode(nullptr, &out, frame.height(), frame.width(), frame.rgb().data(), nullptr);
  return out;
}

BinaryMask read_binary_mask_png(const std::filesystem::path& path) {
  const Decoded d = decode_file(path, true);
  const std::size_t n = static_cast<std::size_t>(d.height) * d.width;
  std::vector<std::uint8_t> bits(n);
  const std::size_t stride = d.color_type == PNG_COLOR_TYPE_PALETTE ? 1 : 3;
  for (std::size_t i = 0; i < n; ++i) {
    bool on = false;
    for (std::size_t c = 0; c < stride; ++c) on = on || d.pixels[i * stride + c] != 0;
    bits[i] = on;
  }
  return BinaryMask(d.height, d.width, std::move(bits));
}

void write_binary_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> rgb(mask.area() * 3);
  for (std::size_t i = 0; i < mask.area(); ++i) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = mask.bits()[i] ? 255 : 0;
  }
  encode_file(path, mask.height(), mask.width(), rgb.data(), nullptr);
}

InstanceMaskSet read_palette_mask_png(const std::filesystem::path& path, std::int64_t frame_index) {
  const Decoded d = decode_file(path, true);
  const std::size_t n = static_cast<std::size_t>(d.height) * d.width;
  std::map<std::int64_t, std::vector<std::uint8_t>> planes;
  if (d.color_type == PNG_COLOR_TYPE_PALETTE) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t id = d.pixels[i];
      if (id == 0) continue;
      auto& plane = planes[id];
      if (plane.empty()) plane.assign(n, 0);
      plane[i] = 1;
    }
  } else {
    std::map<std::uint32_t, std::int64_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t color = (std::uint32_t{d.pixels[3 * i]} << 16) |
                                  (std::uint32_t{d.pixels[3 * i + 1]} << 8) | d.pixels[3 * i + 2];
      if (color == 0) continue;
      auto [it, inserted] = ids.emplace(color, static_cast<std::int64_t>(ids.size()) + 1);
      auto& plane = planes[it->second];
      if (plane.empty()) plane.assign(n, 0);
      plane[i] = 1;
    }
  }
  InstanceMaskSet set(frame_index, {d.height, d.width});
  for (auto& [id, plane] : planes) set.insert(id, BinaryMask(d.height, d.width, std::move(plane)));
  return set;
}

void write_palette_mask_png(const std::filesystem::path& path, const InstanceMaskSet& masks) {
  const Size size = masks.size();
  require(size.height > 0 && size.width > 0, ErrorCode::kInvalidArgument,
          "palette mask: empty dimensions");
  std::int64_t max_id = 0;
  for (const auto& [id, m] : masks.masks()) max_id = std::max(max_id, id);
  require(max_id <= 255, ErrorCode::kInvalidArgument, "palette mask: instance id above 255");
  std::vector<png_color> palette;
  for (std::int64_t i = 0; i <= std::max<std::int64_t>(max_id, 1); ++i) palette.push_back(palette_color(i));
  std::vector<std::uint8_t> indices(static_cast<std::size_t>(size.height) * size.width, 0);
  for (const auto& [id, m] : masks.masks()) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (m.bits()[i]) indices[i] = static_cast<std::uint8_t>(id);
    }
  }
  encode_file(path, size.height, size.width, indices.data(), &palette);
}

Frame overlay(const Frame& frame, const InstanceMaskSet& masks,
              const std::vector<TrackedPointSet>& tracked) {
  std::vector<std::uint8_t> rgb(frame.rgb().begin(), frame.rgb().end());
  for (const auto& [id, m] : masks.masks()) {
    if (m.size() != frame.size()) continue;
    const png_color c = palette_color(id);
    for (std::size_t i = 0; i < m.area(); ++i) {
      if (!m.bits()[i]) continue;
      rgb[3 * i] = static_cast<std::uint8_t>((rgb[3 * i] + c.red) / 2);
      rgb[3 * i + 1] = static_cast<std::uint8_t>((rgb[3 * i + 1] + c.green) / 2);
      rgb[3 * i + 2] = static_cast<std::uint8_t>((rgb[3 * i + 2] + c.blue) / 2);
    }
  }
  for (const auto& set : tracked) {
    for (std::size_t k = 0; k < set.points.size(); ++k) {
      const int cx = static_cast<int>(std::floor(set.points[k].x));
      const int cy = static_cast<int>(std::floor(set.points[k].y));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= frame.width() || y >= frame.height()) continue;
          auto* px = &rgb[(static_cast<std::size_t>(y) * frame.width() + x) * 3];
          px[0] = set.visible[k] ? 255 : 128;
          px[1] = 0;
          px[2] = set.visible[k] ? 0 : 128;
        }
      }
    }
  }
  return Frame(frame.index(), frame.timestamp_ms(), frame.height(), frame.width(), std::move(rgb));
}

}  // namespace tapseg::io
