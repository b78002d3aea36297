#pragma once

#include <string>
#include <vector>

#include "slidr/config.hpp"

namespace slidr {

/// Command orchestration behind the CLI and the C API. All outputs land
/// under the run's output directory; every command is reproducible given
/// the same config and seed.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, std::string out_dir);

  /// command is one of gen, segment, pretrain, probe, simmap, gradcheck.
  void run(const std::string& command);

  void gen();
  void segment();
  void pretrain_cmd();
  void probe_cmd();
  void simmap_cmd();
  void gradcheck_cmd();

  const RunConfig& config() const { return cfg_; }

  // exposed for tests and the acceptance suite
  std::vector<Scene> build_scenes() const;
  std::vector<TrainScene> build_train_scenes(const std::vector<Scene>& scenes) const;
  SuperpixelPartition segment_image(const Image& img) const;
  Eigen::MatrixXd trunk_features(const Scene& scene, const HeadParams& params) const;

 private:
  std::string checkpoint_blob_path() const;
  std::string checkpoint_sidecar_path() const;

  RunConfig cfg_;
  std::string out_;
};

std::string format_double(double v);

}  // namespace slidr
