// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "spatialcot/errors.hpp"
#include "spatialcot/raster_io.hpp"

using namespace spatialcot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spatialcot_raster_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

DepthMap sample_depth() {
  DepthMap d(5, 3);
  for (int v = 0; v < 3; ++v) {
    for (int u = 0; u < 5; ++u) {
      if (u == 1 && v == 1) continue;
      d.set(u, v, 0.25 + 0.5 * u + 0.125 * v);
    }
  }
  return d;
}

}  // namespace

TEST(RasterIo, DepthPngStoresMillimeters) {
  const auto d = sample_depth();
  const auto path = scratch("depth.png");
  write_depth_png(path, d);
  const auto back = read_depth(path);
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  EXPECT_FALSE(back.is_valid(1, 1));
  for (int v = 0; v < 3; ++v) {
    for (int u = 0; u < 5; ++u) {
      if (!d.is_valid(u, v)) continue;
      EXPECT_NEAR(back.at(u, v), d.at(u, v), 0.0005 + 1e-12);
    }
  }
}

TEST(RasterIo, RawFloatWithHeader) {
  const auto d = sample_depth();
  const auto path = scratch("depth.f32");
  write_depth_raw(path, d);
  const auto back = read_depth(path);
  EXPECT_FALSE(back.is_valid(1, 1));
  EXPECT_FLOAT_EQ(static_cast<float>(back.at(4, 2)), static_cast<float>(d.at(4, 2)));
}

TEST(RasterIo, RawMillimeterUnits) {
  const auto path = scratch("mm.f32");
  const float samples[2] = {1500.0f, 0.0f};
  {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(samples), sizeof samples);
    std::ofstream h(path.string() + ".hdr");
    h << "width 2\nheight 1\nunits millimeters\n";
  }
  const auto d = read_depth(path);
  EXPECT_DOUBLE_EQ(d.at(0, 0), 1.5);
  EXPECT_FALSE(d.is_valid(1, 0));
}

TEST(RasterIo, MissingFileIsIoError) {
  EXPECT_THROW(read_depth(scratch("absent.png")), IoError);
  EXPECT_THROW(read_mask(scratch("absent_mask.png")), IoError);
}

TEST(RasterIo, MaskRoundTrip) {
  SegmentationMask m(4, 2);
  m.set(0, 0, 1);
  m.set(3, 1, 200);
  const auto path = scratch("mask.png");
  write_mask_png(path, m);
  const auto back = read_mask(path);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_TRUE(back.descriptions.empty());
}

TEST(RasterIo, GrayRoundTripWithin8Bits) {
  GrayImage g{3, 2, {0.0, 0.25, 0.5, 0.75, 1.0, 0.1}};
  const auto path = scratch("gray.png");
  write_gray_png(path, g);
  const auto back = read_gray(path);
  ASSERT_EQ(back.pixels.size(), g.pixels.size());
  for (std::size_t i = 0; i < g.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], g.pixels[i], 0.5 / 255 + 1e-9);
}
