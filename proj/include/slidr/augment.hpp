#pragma once

#include <array>
#include <string>
#include <vector>

#include "slidr/correspondence.hpp"
#include "slidr/geometry.hpp"
#include "slidr/image.hpp"
#include "slidr/superpixels.hpp"

namespace slidr {

struct AugmentConfig {
  bool rotate_z = true;
  double flip_x_prob = 0.5;
  double flip_y_prob = 0.5;
  double cuboid_max_frac = 0.10;
  int min_pairs = 1024;
  double crop_min_area_frac = 0.30;
  std::array<double, 2> crop_aspect_range{14.0 / 9.0, 17.0 / 9.0};
  int out_width = 416;
  int out_height = 224;
  int image_min_pairs = 1024;
  double image_min_frac = 0.75;
  double hflip_prob = 0.5;
  int max_resample_attempts = 1000;

  void validate() const;
};

struct CuboidRecord {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_sides = Eigen::Vector3d::Zero();
};

struct PointTransformRecord {
  double theta = 0.0;
  bool flip_x = false;
  bool flip_y = false;
  CuboidRecord cuboid;
  int attempts = 1;  // cuboid draws used
};

struct CropRecord {
  int x = 0, y = 0, w = 0, h = 0;
  bool flipped = false;
  int attempts = 1;
};

struct PointAugmentResult {
  PointCloud cloud;
  PairList pairs;                      // point indices refer to `cloud`
  PointTransformRecord record;
  std::vector<std::int64_t> index_map;  // old index -> new index, -1 if dropped
};

/// Rotation about z, optional axis flips, then a cuboid drop centered on a
/// random point. Only the cuboid is redrawn when fewer than `min_pairs`
/// pairs survive; errors with "cannot satisfy pair constraint" when
/// attempts run out.
PointAugmentResult augment_point_cloud(const PointCloud& cloud,
                                       const PairList& pairs,
                                       const AugmentConfig& cfg, Rng& rng);

/// Replays a recorded point transform (rotation, flips, cuboid drop); the
/// result is bit-identical to the original augmentation.
PointCloud apply_point_transform(const PointCloud& cloud,
                                 const PointTransformRecord& rec,
                                 std::vector<std::int64_t>* index_map = nullptr);

struct ImageAugmentResult {
  Image image;
  SuperpixelPartition partition;
  PairList pairs;  // pixel indices remapped into the output image
  CropRecord record;
};

/// Horizontal flip, then a random crop-resize to (out_width, out_height).
/// The crop is redrawn until at least max(image_min_pairs,
/// image_min_frac * |pairs|) pairs survive.
ImageAugmentResult augment_image(const Image& img,
                                 const SuperpixelPartition& part,
                                 const PairList& camera_pairs,
                                 const AugmentConfig& cfg, Rng& rng);

ImageAugmentResult apply_image_transform(const Image& img,
                                         const SuperpixelPartition& part,
                                         const PairList& camera_pairs,
                                         const CropRecord& rec, int out_width,
                                         int out_height);

std::string point_transform_to_json(const PointTransformRecord& rec);
PointTransformRecord point_transform_from_json(const std::string& text);
std::string crop_to_json(const CropRecord& rec);
CropRecord crop_from_json(const std::string& text);

}  // namespace slidr
