#pragma once

#include <cstdint>
#include <string>

#include "slidr/augment.hpp"
#include "slidr/distill.hpp"
#include "slidr/eval.hpp"
#include "slidr/model.hpp"
#include "slidr/scenegen.hpp"

namespace slidr {

struct SuperpixelConfig {
  std::string algorithm = "slic";  // "slic" or "fh"
  int q = 24;
  double compactness = 10.0;
  int iters = 10;
  double fh_scale = 300.0;
  double fh_sigma = 0.35;
  int fh_min_size = 4000;
};

struct SimmapConfig {
  int scene = 0;
  int camera = 0;
  std::int64_t query_point = -1;  // -1: first non-ground point
};

struct PathsConfig {
  std::string data;        // scene directories; empty = generate in memory
  std::string checkpoint;  // empty = <out>/checkpoint.f64
};

/// Whole-run configuration; one JSON document with defaults for every
/// field. Unknown keys are rejected; invalid values raise config errors
/// naming the offending field path.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  int num_scenes = 8;
  PathsConfig paths;
  ModelDims dims;
  SceneSpec scene;
  SuperpixelConfig superpixels;
  CylVoxelSpec voxel;
  AugmentConfig augment;
  LossConfig loss;
  OptimizerConfig optimizer;
  ProbeConfig probe;
  SimmapConfig simmap;

  static RunConfig defaults();
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json_text() const;

  /// Applies one `key.path=value` override (value parsed as JSON, falling
  /// back to a string), then revalidates.
  void set_path(const std::string& key_path, const std::string& value);

  void validate() const;
};

}  // namespace slidr
