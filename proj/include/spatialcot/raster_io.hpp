// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spatialcot/geometry.hpp"

namespace spatialcot {

/// Single-channel luminance in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

/// Depth rasters come in two encodings:
///  - 16-bit grayscale PNG holding millimeters, 0 = invalid;
///  - raw little-endian float32 rows with a sidecar `<path>.hdr` holding
///    `width <w>`, `height <h>` and `units meters|millimeters` lines.
///    Non-finite or non-positive samples are invalid.
/// The encoding is chosen by the `.png` extension.
DepthMap read_depth(const std::filesystem::path& path);

/// 8-bit indexed (palette) or 8-bit grayscale PNG; the stored index is the
/// object id. Descriptions are left empty for the caller to fill.
SegmentationMask read_mask(const std::filesystem::path& path);

/// Any PNG, converted to luminance.
GrayImage read_gray(const std::filesystem::path& path);

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth);
void write_depth_raw(const std::filesystem::path& path, const DepthMap& depth);
void write_mask_png(const std::filesystem::path& path, const SegmentationMask& mask);
void write_gray_png(const std::filesystem::path& path, const GrayImage& image);

}  // namespace spatialcot
