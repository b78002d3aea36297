#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "slidr/common.hpp"

namespace slidr {

struct PointCloud {
  Eigen::MatrixX3d points;  // N x 3, meters, Lidar frame
  std::vector<int> labels;  // empty, or one class id per point (eval only)

  Eigen::Index size() const { return points.rows(); }
  bool has_labels() const { return !labels.empty(); }
  void validate(int num_classes = -1) const;
};

/// Pinhole camera posed relative to the Lidar frame. `rotation` maps Lidar
/// coordinates into the camera frame (x right, y down, z forward).
struct CameraModel {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  int pixel_count() const { return width * height; }
  void validate() const;
};

struct CameraRig {
  std::vector<CameraModel> cameras;
  void validate() const;
};

/// Per-point pixel assignment, one plane per camera. Pixel indices are
/// 1-based row-major in {1..W*H}; 0 means the point is not visible.
struct PixelMap {
  struct Plane {
    int width = 0, height = 0;
    std::vector<std::uint32_t> pixel;  // size N
  };
  std::vector<Plane> cameras;
  std::int64_t num_points = 0;
};

struct CylVoxelSpec {
  double dz = 0.1;           // meters
  double dr = 0.1;           // meters
  double dazimuth = 1.0;     // degrees
  void validate() const;
  int azimuth_bins() const;  // 360 / dazimuth
};

struct VoxelId {
  std::int64_t radial = 0;
  std::int64_t azimuth = 0;
  std::int64_t height = 0;
  auto operator<=>(const VoxelId&) const = default;
};

struct CylVoxelization {
  std::vector<VoxelId> per_point;
  std::vector<VoxelId> occupied;  // sorted, unique
  std::vector<int> occupancy;     // per point: population of its voxel
  double z_min = 0.0;
};

inline constexpr double kNearPlane = 1e-6;

/// Projects one point; returns the 1-based row-major pixel index or 0 when
/// the point is behind the near plane or lands outside the image. Rounds to
/// the nearest pixel center, half-up toward +x/+y.
std::uint32_t project_point(const CameraModel& cam, const Eigen::Vector3d& p);

/// With `zbuffer` on, of all points mapping to one pixel only the nearest
/// (smallest camera-frame depth, ties to the lowest point index) keeps it.
PixelMap build_pixel_map(const CameraRig& rig, const PointCloud& cloud,
                         bool zbuffer = false);

CylVoxelization cylindrical_voxelize(const PointCloud& cloud,
                                     const CylVoxelSpec& spec);

// --- file formats ---

/// Binary point-cloud format: magic "SLPC0001", little-endian u64 N,
/// N x 3 float64 coordinates, then optionally N u32 labels.
void write_point_cloud(const std::string& path, const PointCloud& cloud);
PointCloud read_point_cloud(const std::string& path);

void write_camera_rig(const std::string& path, const CameraRig& rig);
CameraRig read_camera_rig(const std::string& path);

}  // namespace slidr
