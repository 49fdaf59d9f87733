// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spatialcot/errors.hpp"

namespace spatialcot {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw ConfigurationError("intrinsics: focal lengths must be positive and finite");
  }
  if (width <= 0 || height <= 0) {
    throw ConfigurationError("intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ConfigurationError("intrinsics: principal point outside the image");
  }
}

DepthMap::DepthMap(int w, int h)
    : width(w),
      height(h),
      values(static_cast<std::size_t>(w) * h, 0.0),
      valid(static_cast<std::size_t>(w) * h, 0) {}

void DepthMap::set(int u, int v, double depth) {
  values[index(u, v)] = depth;
  valid[index(u, v)] = 1;
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

void DepthMap::validate() const {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width <= 0 || height <= 0 || values.size() != n || valid.size() != n) {
    throw ConfigurationError("depth map: dimensions do not match data length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i] && !(std::isfinite(values[i]) && values[i] > 0.0)) {
      throw ConfigurationError("depth map: valid pixel with non-positive or non-finite depth");
    }
  }
}

SegmentationMask::SegmentationMask(int w, int h)
    : width(w), height(h), labels(static_cast<std::size_t>(w) * h, kBackground) {}

void SegmentationMask::validate() const {
  if (width <= 0 || height <= 0 ||
      labels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ConfigurationError("mask: dimensions do not match data length");
  }
  for (ObjectId id : labels) {
    if (id != kBackground && !descriptions.contains(id)) {
      throw ConfigurationError("mask: object " + std::to_string(id) + " has no description");
    }
  }
}

void PointCloud::validate() const {
  if (points.size() != object_ids.size()) {
    throw ConfigurationError("point cloud: points and object ids differ in length");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw ConfigurationError("point cloud: non-finite coordinate");
    }
  }
}

PointCloud backproject(const DepthMap& depth, const SegmentationMask& mask,
                       const CameraIntrinsics& intr) {
  intr.validate();
  depth.validate();
  if (depth.width != intr.width || depth.height != intr.height || mask.width != depth.width ||
      mask.height != depth.height || mask.labels.size() != depth.values.size()) {
    throw ConfigurationError("backproject: depth, mask and intrinsics dimensions disagree");
  }

  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  cloud.object_ids.reserve(depth.valid_count());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v)) continue;
      const double z = depth.at(u, v);
      const double x = (u - intr.cx) * z / intr.fx;
      const double y_cam = (v - intr.cy) * z / intr.fy;
      cloud.points.push_back({x, -y_cam, z});
      cloud.object_ids.push_back(mask.at(u, v));
    }
  }
  if (cloud.empty()) throw EmptyCloudError("backproject: depth map has no valid pixels");
  return cloud;
}

DepthMap reproject(const PointCloud& cloud, const CameraIntrinsics& intr) {
  intr.validate();
  cloud.validate();
  if (cloud.empty()) throw EmptyCloudError("reproject: empty cloud");

  DepthMap out(intr.width, intr.height);
  for (const auto& p : cloud.points) {
    if (!(p.z > 0.0)) throw GeometryError("reproject: point behind the camera");
    const double u = p.x * intr.fx / p.z + intr.cx;
    const double v = -p.y * intr.fy / p.z + intr.cy;
    const long ui = std::lround(u);
    const long vi = std::lround(v);
    if (ui < 0 || vi < 0 || ui >= intr.width || vi >= intr.height) continue;
    const auto iu = static_cast<int>(ui);
    const auto iv = static_cast<int>(vi);
    if (!out.is_valid(iu, iv) || p.z < out.at(iu, iv)) out.set(iu, iv, p.z);
  }
  return out;
}

BoundingCube bounding_cube(const PointCloud& cloud, ObjectId id) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingCube cube{id, {inf, inf, inf}, {-inf, -inf, -inf}};
  bool found = false;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.object_ids[i] != id) continue;
    const auto& p = cloud.points[i];
    cube.min_corner = {std::min(cube.min_corner.x, p.x), std::min(cube.min_corner.y, p.y),
                       std::min(cube.min_corner.z, p.z)};
    cube.max_corner = {std::max(cube.max_corner.x, p.x), std::max(cube.max_corner.y, p.y),
                       std::max(cube.max_corner.z, p.z)};
    found = true;
  }
  if (!found) throw NotFoundError("bounding_cube: no points for object " + std::to_string(id));
  return cube;
}

std::vector<BoundingCube> bounding_cubes(const PointCloud& cloud) {
  std::vector<ObjectId> ids;
  for (ObjectId id : cloud.object_ids) {
    if (id != kBackground) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  // One pass instead of one scan per id.
  std::map<ObjectId, std::size_t> slot;
  std::vector<BoundingCube> cubes;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (ObjectId id : ids) {
    slot[id] = cubes.size();
    cubes.push_back({id, {inf, inf, inf}, {-inf, -inf, -inf}});
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ObjectId id = cloud.object_ids[i];
    if (id == kBackground) continue;
    auto& c = cubes[slot[id]];
    const auto& p = cloud.points[i];
    c.min_corner = {std::min(c.min_corner.x, p.x), std::min(c.min_corner.y, p.y),
                    std::min(c.min_corner.z, p.z)};
    c.max_corner = {std::max(c.max_corner.x, p.x), std::max(c.max_corner.y, p.y),
                    std::max(c.max_corner.z, p.z)};
  }
  return cubes;
}

SpatialRelation spatial_relation(const BoundingCube& a, const BoundingCube& b, double eps) {
  const Vec3 ca = a.center();
  const Vec3 cb = b.center();
  SpatialRelation r;
  r.left_of = ca.x < cb.x - eps;
  r.right_of = ca.x > cb.x + eps;
  r.below = ca.y < cb.y - eps;
  r.above = ca.y > cb.y + eps;
  r.in_front_of = ca.z < cb.z - eps;
  r.behind = ca.z > cb.z + eps;
  r.center_distance = norm(ca - cb);
  return r;
}

std::map<ObjectId, PixelBox> pixel_boxes(const SegmentationMask& mask) {
  std::map<ObjectId, PixelBox> boxes;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      const ObjectId id = mask.at(u, v);
      if (id == kBackground) continue;
      auto [it, inserted] = boxes.try_emplace(id, PixelBox{u, v, u, v});
      if (!inserted) {
        auto& b = it->second;
        b.u_min = std::min(b.u_min, u);
        b.v_min = std::min(b.v_min, v);
        b.u_max = std::max(b.u_max, u);
        b.v_max = std::max(b.v_max, v);
      }
    }
  }
  return boxes;
}

}  // namespace spatialcot
