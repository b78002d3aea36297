#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slidr/augment.hpp"
#include "slidr/correspondence.hpp"
#include "slidr/model.hpp"

namespace slidr {

struct LossConfig {
  enum class Mode { superpixel, pixel };
  double temperature = 0.07;
  Mode mode = Mode::superpixel;
  int pixel_sample_size = 4096;
  void validate() const;
};

struct OptimizerConfig {
  double lr0 = 0.5;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double dampening = 0.1;
  int epochs = 50;
  int batch_size = 4;
  void validate() const;
};

/// Batch of matched embedding pairs for the contrastive loss. Rows are unit
/// norm; provenance identifies the source of each pair.
struct PooledPairs {
  Eigen::MatrixXd f, g;  // K x F
  struct Provenance {
    int scene = 0;
    int camera = 0;
    std::int64_t superpixel = 0;  // pair ordinal in pixel mode
  };
  std::vector<Provenance> provenance;
  Eigen::Index count() const { return f.rows(); }
};

struct PooledVector {
  int camera = 0;
  std::int32_t superpixel = 0;
  Eigen::VectorXd value;
};

/// Mean of the head-output rows of every non-empty group, summed
/// sequentially in ascending point order. Not re-normalized.
std::vector<PooledVector> pool_superpoint(const Eigen::MatrixXd& point_embeddings,
                                          const SuperpointGroups& groups);

/// Mean per-pixel embedding over each kept superpixel. Not re-normalized.
std::vector<PooledVector> pool_superpixel(const FeatureGrid& pixel_embeddings,
                                          const SuperpixelPartition& part,
                                          const std::vector<std::int32_t>& keep,
                                          int camera);

/// Sum over anchors of -log softmax(<f_k, g_k'>/tau), the denominator
/// running over every pair in the batch. Max-subtraction stable.
double contrastive_loss(const PooledPairs& pairs, const LossConfig& cfg);

struct PairGrads {
  Eigen::MatrixXd df, dg;  // K x F
  double loss = 0.0;
};
PairGrads contrastive_loss_backward(const PooledPairs& pairs, const LossConfig& cfg);

/// Same objective with individual point-pixel pairs as anchors, uniformly
/// subsampled without replacement to cfg.pixel_sample_size.
double pixel_mode_loss(const Eigen::MatrixXd& point_embeddings,
                       const std::vector<FeatureGrid>& pixel_embeddings,
                       const PairList& pairs, const LossConfig& cfg, Rng& rng);

double cosine_lr(int t, int total, double lr0);

struct SgdState {
  HeadParams velocity;
  bool initialized = false;
};

/// g~ = grad + weight_decay * param; v <- momentum * v + (1 - dampening) * g~
/// (v starts at g~); param <- param - lr * v.
void sgd_step(HeadParams& params, const HeadParams& grads, SgdState& state,
              const OptimizerConfig& cfg, double lr);

// --- batch machinery shared by the training loop and the gradient checker ---

/// Parameter-independent inputs of one scene's forward pass.
struct SceneData {
  Eigen::MatrixXd descriptors;                  // N x K
  std::vector<FeatureGrid> feature_maps;        // per camera, frozen
  std::vector<SuperpixelPartition> partitions;  // per camera, output resolution
  SuperpointGroups groups;                      // superpixel mode
  PairList sampled_pairs;                       // pixel mode anchors
};

struct SceneArtifacts {
  TrunkForward trunk;
  PointHeadForward phead;
  std::vector<ImageHeadForward> iheads;
};

SceneArtifacts forward_scene(const SceneData& data, const HeadParams& params,
                             int upsample_factor = 4);

struct BatchAssembly {
  PooledPairs pairs;            // normalized
  Eigen::MatrixXd raw_f, raw_g; // pooled vectors before normalization
  struct Member {
    int scene = 0;
    int camera = 0;
    std::int64_t tag = 0;                // superpixel id or pair ordinal
    std::vector<std::int64_t> points;    // rows of the point embeddings
    std::vector<std::int64_t> pixels;    // flat pixel ids in that camera
  };
  std::vector<Member> members;
};

BatchAssembly assemble_batch(const std::vector<SceneData>& data,
                             const std::vector<SceneArtifacts>& fwd,
                             LossConfig::Mode mode);

struct BatchBackwardResult {
  double loss = 0.0;
  HeadParams grads;
};

/// Full analytic backward: loss -> pooled-vector normalization -> pooling
/// means -> head normalizations -> linear heads -> bilinear upsampling
/// transpose -> 1x1 conv -> trunk tanh layers. The frozen 2D features
/// receive no gradient.
BatchBackwardResult batch_backward(const std::vector<SceneData>& data,
                                   const std::vector<SceneArtifacts>& fwd,
                                   const BatchAssembly& batch,
                                   const HeadParams& params,
                                   const LossConfig& cfg, const ModelDims& dims,
                                   int threads = 1);

// --- training loop ---

struct TrainScene {
  PointCloud cloud;                             // original, unaugmented
  std::vector<Image> images;                    // per camera
  std::vector<SuperpixelPartition> partitions;  // computed on the originals
  PairList pairs;                               // ground-truth correspondences
};

struct EpochStats {
  double lr = 0.0;
  double mean_loss = 0.0;        // per anchor
  std::int64_t pair_count = 0;   // anchors seen this epoch
};

struct PretrainResult {
  HeadParams params;
  std::vector<EpochStats> history;
};

PretrainResult pretrain(const std::vector<TrainScene>& scenes,
                        const ModelDims& dims, const AugmentConfig& aug,
                        const LossConfig& loss, const OptimizerConfig& opt,
                        const CylVoxelSpec& voxel, std::uint64_t seed,
                        int threads = 1);

// --- finite-difference suite (also surfaced as the gradcheck command) ---

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

GradCheckReport gradient_check(std::uint64_t seed, double tolerance = 1e-4,
                               LossConfig::Mode mode = LossConfig::Mode::superpixel);

}  // namespace slidr
