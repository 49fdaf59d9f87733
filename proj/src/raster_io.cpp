// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "spatialcot/errors.hpp"

namespace spatialcot {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_warning_fn(png_structp, png_const_charp) {}

/// Decoded PNG without palette expansion or gamma handling.
struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;  // rows packed back to back
  std::size_t row_bytes = 0;
};

RawPng read_png_raw(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                           png_warning_fn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  RawPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if (out.bit_depth < 8) png_set_packing(png);
  if (out.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  out.channels = png_get_channels(png, info);
  out.row_bytes = png_get_rowbytes(png, info);
  out.data.resize(out.row_bytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int v = 0; v < out.height; ++v) {
    rows[static_cast<std::size_t>(v)] = out.data.data() + out.row_bytes * static_cast<std::size_t>(v);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png_raw(const std::filesystem::path& path, int width, int height, int bit_depth,
                   int color_type, const std::vector<std::uint8_t>& data, std::size_t row_bytes,
                   const std::vector<png_color>& palette = {}) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                            png_warning_fn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot write PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (!palette.empty()) {
    png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  }
  png_write_info(png, info);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  for (int v = 0; v < height; ++v) {
    rows[static_cast<std::size_t>(v)] =
        const_cast<png_bytep>(data.data() + row_bytes * static_cast<std::size_t>(v));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

DepthMap read_depth_png(const std::filesystem::path& path) {
  const RawPng raw = read_png_raw(path);
  if (raw.color_type != PNG_COLOR_TYPE_GRAY || raw.bit_depth != 16) {
    throw ConfigurationError("depth PNG must be 16-bit grayscale: " + path.string());
  }
  DepthMap depth(raw.width, raw.height);
  for (int v = 0; v < raw.height; ++v) {
    const auto* row = raw.data.data() + raw.row_bytes * static_cast<std::size_t>(v);
    for (int u = 0; u < raw.width; ++u) {
      std::uint16_t mm = 0;
      std::memcpy(&mm, row + 2 * u, 2);
      if (mm != 0) depth.set(u, v, mm / 1000.0);
    }
  }
  return depth;
}

DepthMap read_depth_raw(const std::filesystem::path& path) {
  std::filesystem::path header = path;
  header += ".hdr";
  std::ifstream hin(header);
  if (!hin) throw IoError("missing depth sidecar " + header.string());
  int width = 0;
  int height = 0;
  double scale = 1.0;
  std::string key;
  while (hin >> key) {
    if (key == "width") {
      hin >> width;
    } else if (key == "height") {
      hin >> height;
    } else if (key == "units") {
      std::string units;
      hin >> units;
      if (units == "meters") {
        scale = 1.0;
      } else if (units == "millimeters") {
        scale = 1e-3;
      } else {
        throw ConfigurationError("depth sidecar: unknown units '" + units + "'");
      }
    } else {
      throw ConfigurationError("depth sidecar: unknown key '" + key + "'");
    }
  }
  if (width <= 0 || height <= 0) throw ConfigurationError("depth sidecar: bad dimensions");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> bytes(n * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() || in.peek() != EOF) {
    throw ConfigurationError("raw depth: file size does not match sidecar dimensions");
  }
  DepthMap depth(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    const double d = static_cast<double>(std::bit_cast<float>(bits)) * scale;
    if (std::isfinite(d) && d > 0.0) {
      depth.values[i] = d;
      depth.valid[i] = 1;
    }
  }
  return depth;
}

}  // namespace

DepthMap read_depth(const std::filesystem::path& path) {
  return path.extension() == ".png" ? read_depth_png(path) : read_depth_raw(path);
}

SegmentationMask read_mask(const std::filesystem::path& path) {
  const RawPng raw = read_png_raw(path);
  const bool indexed = raw.color_type == PNG_COLOR_TYPE_PALETTE;
  const bool gray8 = raw.color_type == PNG_COLOR_TYPE_GRAY && raw.bit_depth <= 8;
  if (!indexed && !gray8) {
    throw ConfigurationError("mask PNG must be 8-bit indexed or grayscale: " + path.string());
  }
  SegmentationMask mask(raw.width, raw.height);
  for (int v = 0; v < raw.height; ++v) {
    const auto* row = raw.data.data() + raw.row_bytes * static_cast<std::size_t>(v);
    for (int u = 0; u < raw.width; ++u) mask.set(u, v, row[u]);
  }
  return mask;
}

GrayImage read_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  GrayImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.reserve(buffer.size());
  for (std::uint8_t b : buffer) out.pixels.push_back(b / 255.0);
  return out;
}

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth) {
  const auto row_bytes = static_cast<std::size_t>(depth.width) * 2;
  std::vector<std::uint8_t> data(row_bytes * static_cast<std::size_t>(depth.height));
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      std::uint16_t mm = 0;
      if (depth.is_valid(u, v)) {
        const double scaled = std::round(depth.at(u, v) * 1000.0);
        if (scaled < 1.0 || scaled > 65535.0) {
          throw DomainError("depth out of 16-bit millimeter range");
        }
        mm = static_cast<std::uint16_t>(scaled);
      }
      std::memcpy(data.data() + row_bytes * static_cast<std::size_t>(v) + 2 * u, &mm, 2);
    }
  }
  write_png_raw(path, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, data, row_bytes);
}

void write_depth_raw(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    const float f = depth.valid[i] ? static_cast<float>(depth.values[i]) : 0.0f;
    const auto bits = std::bit_cast<std::uint32_t>(f);
    const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                        static_cast<char>((bits >> 16) & 0xff),
                        static_cast<char>((bits >> 24) & 0xff)};
    out.write(le, 4);
  }
  std::filesystem::path header = path;
  header += ".hdr";
  std::ofstream hout(header);
  if (!hout) throw IoError("cannot write " + header.string());
  hout << "width " << depth.width << "\nheight " << depth.height << "\nunits meters\n";
}

void write_mask_png(const std::filesystem::path& path, const SegmentationMask& mask) {
  std::vector<std::uint8_t> data(mask.labels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (mask.labels[i] > 255) throw DomainError("mask label does not fit in 8 bits");
    data[i] = static_cast<std::uint8_t>(mask.labels[i]);
  }
  std::vector<png_color> palette(256);
  for (int i = 0; i < 256; ++i) {
    const auto c = static_cast<png_byte>(i);
    palette[static_cast<std::size_t>(i)] = {c, static_cast<png_byte>(c * 37), static_cast<png_byte>(c * 91)};
  }
  write_png_raw(path, mask.width, mask.height, 8, PNG_COLOR_TYPE_PALETTE, data,
                static_cast<std::size_t>(mask.width), palette);
}

void write_gray_png(const std::filesystem::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> data(image.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double c = std::clamp(image.pixels[i], 0.0, 1.0);
    data[i] = static_cast<std::uint8_t>(std::lround(c * 255.0));
  }
  write_png_raw(path, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY, data,
                static_cast<std::size_t>(image.width));
}

}  // namespace spatialcot
