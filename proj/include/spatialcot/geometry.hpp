// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spatialcot {

/// Canonical frame: origin at the camera, +x right, +y up, +z forward.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator*(const Vec3& a, double s);
double norm(const Vec3& v);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws ConfigurationError unless fx, fy > 0 and the principal point
  /// lies inside the image.
  void validate() const;
};

using ObjectId = std::uint32_t;
inline constexpr ObjectId kBackground = 0;

/// Metric depth raster, row-major. Pixels with `valid[i] == 0` carry no depth.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h);

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  double at(int u, int v) const { return values[index(u, v)]; }
  void set(int u, int v, double depth);

  std::size_t valid_count() const;
  /// Throws ConfigurationError on size mismatch or a valid value that is not
  /// positive and finite.
  void validate() const;
};

/// Per-pixel object labels (0 = background) plus a text description per object.
struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<ObjectId> labels;
  std::map<ObjectId, std::string> descriptions;

  SegmentationMask() = default;
  SegmentationMask(int w, int h);

  ObjectId at(int u, int v) const { return labels[static_cast<std::size_t>(v) * width + u]; }
  void set(int u, int v, ObjectId id) { labels[static_cast<std::size_t>(v) * width + u] = id; }

  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<ObjectId> object_ids;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void validate() const;
};

struct BoundingCube {
  ObjectId object_id = kBackground;
  Vec3 min_corner;
  Vec3 max_corner;

  Vec3 center() const { return (min_corner + max_corner) * 0.5; }
};

struct SpatialRelation {
  bool left_of = false;
  bool right_of = false;
  bool above = false;
  bool below = false;
  bool in_front_of = false;
  bool behind = false;
  double center_distance = 0.0;
};

/// Axis-aligned pixel rectangle, inclusive on both ends.
struct PixelBox {
  int u_min = 0;
  int v_min = 0;
  int u_max = -1;
  int v_max = -1;

  bool empty() const { return u_max < u_min || v_max < v_min; }
};

inline constexpr double kDefaultRelationEps = 0.02;

/// Lifts every valid depth pixel through the pinhole model into the canonical
/// frame. Points inherit the mask label at their pixel.
PointCloud backproject(const DepthMap& depth, const SegmentationMask& mask,
                       const CameraIntrinsics& intr);

/// Inverse of backproject onto an empty raster; when several points land on
/// one pixel the nearest depth is kept.
DepthMap reproject(const PointCloud& cloud, const CameraIntrinsics& intr);

/// Componentwise extent of the points carrying `id`. Throws NotFoundError if none.
BoundingCube bounding_cube(const PointCloud& cloud, ObjectId id);

/// Cubes for every nonzero object id present in the cloud, ordered by id.
std::vector<BoundingCube> bounding_cubes(const PointCloud& cloud);

/// Center-based predicates with a dead zone of `eps` meters on every axis.
SpatialRelation spatial_relation(const BoundingCube& a, const BoundingCube& b,
                                 double eps = kDefaultRelationEps);

/// 2D extent of each nonzero label in the mask, ordered by id.
std::map<ObjectId, PixelBox> pixel_boxes(const SegmentationMask& mask);

}  // namespace spatialcot
