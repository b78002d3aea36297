#pragma once

#include <string>
#include <vector>

#include "slidr/correspondence.hpp"
#include "slidr/geometry.hpp"
#include "slidr/image.hpp"

namespace slidr {

inline constexpr int kClassGround = 0;
inline constexpr int kClassVehicle = 1;
inline constexpr int kClassPole = 2;
inline constexpr int kNumSceneClasses = 3;

struct SceneSpec {
  int num_cameras = 2;
  int image_width = 64, image_height = 48;
  int beams = 16, azimuth_steps = 600;
  double elevation_min_deg = -25.0, elevation_max_deg = 3.0;
  double max_range = 40.0;
  double sensor_height = 1.8;
  double hfov_deg = 100.0;
  int boxes_min = 3, boxes_max = 6;
  int poles_min = 2, poles_max = 4;
  Eigen::Vector3d box_size_min{1.6, 1.6, 1.0};
  Eigen::Vector3d box_size_max{4.5, 2.2, 2.0};
  double pole_radius_min = 0.10, pole_radius_max = 0.28;
  double pole_height_min = 3.0, pole_height_max = 6.0;
  double placement_radius_min = 4.0, placement_radius_max = 16.0;
  double ground_tile = 4.0;   // meters; each tile is its own flat-color instance
  double hue_jitter = 0.08;
  double dropout = 0.0;
  double corrupt_fraction = 0.0;

  void validate() const;
};

struct Scene {
  PointCloud cloud;  // labels filled
  std::vector<Image> images;
  CameraRig rig;
  PairList pairs;  // exact, label-consistent ground truth
  std::vector<std::vector<int>> pixel_labels;  // per camera; -1 = sky
};

/// Ray-casts the Lidar pattern and renders every camera against the same
/// analytic geometry. Deterministic given the seed. Errors with "scene too
/// sparse" when fewer than 1024 pairs result.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Reassigns a seeded subset (exactly round(fraction * |pairs|)) of pair
/// pixels to uniformly random valid pixels of the same camera.
PairList corrupt_correspondences(const PairList& pairs,
                                 const std::vector<int>& pixels_per_camera,
                                 double fraction, std::uint64_t seed);

void write_scene_dir(const std::string& dir, const Scene& scene);
Scene read_scene_dir(const std::string& dir);

}  // namespace slidr
