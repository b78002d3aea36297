#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "slidr/geometry.hpp"
#include "slidr/image.hpp"

namespace slidr {

struct ModelDims {
  int d = 32;  // 3D feature width
  int e = 64;  // 2D feature width
  int f = 16;  // shared embedding width
  void validate() const;
};

/// Raw per-point descriptor width consumed by the trainable net.
inline constexpr int kDescriptorWidth = 8;

/// Dense per-location feature grid; used for 2D backbone outputs (E
/// channels at W/4 x H/4) and per-pixel embeddings (F channels at W x H).
struct FeatureGrid {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;  // (y*W + x)*C + c

  double* at(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const double* at(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  static FeatureGrid zeros(int w, int h, int c) {
    FeatureGrid g;
    g.width = w;
    g.height = h;
    g.channels = c;
    g.data.assign(static_cast<std::size_t>(w) * h * c, 0.0);
    return g;
  }
};

/// Frozen, parameter-free 2D extractor. Each output cell is a function of
/// its own 4x4 patch only: per-channel means and stds, horizontal/vertical
/// gradient magnitudes, then fixed seeded random projections of the patch.
FeatureGrid toy_image_backbone(const Image& img, int e);

/// Per-point raw descriptors, N x 8: radius, z, azimuth sin/cos, voxel
/// occupancy, neighbor count within 0.5 m, height above the cloud minimum,
/// and a reserved zero channel.
Eigen::MatrixXd point_descriptor(const PointCloud& cloud,
                                 const CylVoxelization& voxels);

struct TrunkParams {
  Eigen::MatrixXd w1;  // K x D
  Eigen::VectorXd b1;  // D
  Eigen::MatrixXd w2;  // D x D
  Eigen::VectorXd b2;  // D
};

struct LinearHeadParams {
  Eigen::MatrixXd w;  // in x F
  Eigen::VectorXd b;  // F
};

struct HeadParams {
  TrunkParams trunk;
  LinearHeadParams point_head;  // D x F
  LinearHeadParams image_head;  // E x F

  static HeadParams init(const ModelDims& dims, std::uint64_t seed);
  static HeadParams zeros(const ModelDims& dims);
  void validate(const ModelDims& dims) const;
};

struct TrunkForward {
  Eigen::MatrixXd hidden;    // N x D, tanh activations
  Eigen::MatrixXd features;  // N x D
};
TrunkForward trainable_point_net(const Eigen::MatrixXd& desc,
                                 const TrunkParams& params);

struct PointHeadForward {
  Eigen::MatrixXd pre;    // N x F, before normalization
  Eigen::MatrixXd out;    // N x F, unit rows
  Eigen::VectorXd norms;  // N
};
PointHeadForward point_head(const Eigen::MatrixXd& point_features,
                            const LinearHeadParams& params);

struct ImageHeadForward {
  FeatureGrid pre;            // W x H x F, upsampled, before normalization
  FeatureGrid out;            // W x H x F, unit vectors per pixel
  std::vector<double> norms;  // per pixel
};
/// 1x1 convolution at the feature-map resolution, bilinear upsampling by
/// `factor`, then per-pixel l2 normalization.
ImageHeadForward image_head(const FeatureGrid& fm, const LinearHeadParams& params,
                            int factor = 4);

/// Sample-center convention with border clamping.
FeatureGrid bilinear_upsample(const FeatureGrid& grid, int factor);

/// Checkpoint: flat little-endian float64 blob plus a JSON sidecar with
/// shapes, dims and an FNV-1a checksum.
void save_params(const std::string& blob_path, const std::string& sidecar_path,
                 const HeadParams& params, const ModelDims& dims);
HeadParams load_params(const std::string& blob_path,
                       const std::string& sidecar_path, ModelDims& dims);

}  // namespace slidr
