#include "slidr/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace slidr {

namespace {

constexpr std::uint64_t kSceneStream = 21;
constexpr std::uint64_t kCorruptStream = 22;
constexpr std::uint64_t kProbeStream = 23;

std::string scene_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", i);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Pipeline::Pipeline(RunConfig cfg, std::string out_dir)
    : cfg_(std::move(cfg)), out_(std::move(out_dir)) {
  cfg_.validate();
  if (out_.empty()) fail_config("output directory must not be empty");
}

std::string Pipeline::checkpoint_blob_path() const {
  return cfg_.paths.checkpoint.empty() ? out_ + "/checkpoint.f64"
                                       : cfg_.paths.checkpoint;
}

std::string Pipeline::checkpoint_sidecar_path() const {
  std::string blob = checkpoint_blob_path();
  if (blob.size() > 4 && blob.substr(blob.size() - 4) == ".f64")
    return blob.substr(0, blob.size() - 4) + ".json";
  return blob + ".json";
}

std::vector<Scene> Pipeline::build_scenes() const {
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg_.num_scenes));
  if (cfg_.paths.data.empty()) {
    for (int i = 0; i < cfg_.num_scenes; ++i)
      scenes.push_back(generate_scene(
          cfg_.scene, derive_seed(cfg_.seed, kSceneStream, static_cast<std::uint64_t>(i))));
  } else {
    for (int i = 0; i < cfg_.num_scenes; ++i) {
      const std::string dir = cfg_.paths.data + "/" + scene_dir_name(i);
      if (!std::filesystem::exists(dir)) fail("missing scene directory: " + dir);
      scenes.push_back(read_scene_dir(dir));
    }
  }
  return scenes;
}

SuperpixelPartition Pipeline::segment_image(const Image& img) const {
  if (cfg_.superpixels.algorithm == "fh")
    return felzenszwalb(img, cfg_.superpixels.fh_scale, cfg_.superpixels.fh_sigma,
                        cfg_.superpixels.fh_min_size);
  return slic(img, cfg_.superpixels.q, cfg_.superpixels.compactness,
              cfg_.superpixels.iters, cfg_.seed);
}

std::vector<TrainScene> Pipeline::build_train_scenes(
    const std::vector<Scene>& scenes) const {
  std::vector<TrainScene> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& sc = scenes[i];
    TrainScene ts;
    ts.cloud = sc.cloud;
    ts.images = sc.images;
    for (const Image& img : sc.images) ts.partitions.push_back(segment_image(img));
    ts.pairs = sc.pairs;
    if (cfg_.scene.corrupt_fraction > 0.0) {
      std::vector<int> pixels_per_camera;
      for (const CameraModel& cam : sc.rig.cameras)
        pixels_per_camera.push_back(cam.pixel_count());
      ts.pairs = corrupt_correspondences(
          ts.pairs, pixels_per_camera, cfg_.scene.corrupt_fraction,
          derive_seed(cfg_.seed, kCorruptStream, static_cast<std::uint64_t>(i)));
    }
    out.push_back(std::move(ts));
  }
  return out;
}

Eigen::MatrixXd Pipeline::trunk_features(const Scene& scene,
                                         const HeadParams& params) const {
  const CylVoxelization vox = cylindrical_voxelize(scene.cloud, cfg_.voxel);
  const Eigen::MatrixXd desc = point_descriptor(scene.cloud, vox);
  return trainable_point_net(desc, params.trunk).features;
}

void Pipeline::gen() {
  std::filesystem::create_directories(out_);
  const std::vector<Scene> scenes = build_scenes();
  for (std::size_t i = 0; i < scenes.size(); ++i)
    write_scene_dir(out_ + "/" + scene_dir_name(static_cast<int>(i)), scenes[i]);
}

void Pipeline::segment() {
  std::filesystem::create_directories(out_);
  const std::vector<Scene> scenes = build_scenes();
  std::ofstream stats(out_ + "/segment_stats.csv");
  if (!stats) fail("cannot open for writing: " + out_ + "/segment_stats.csv");
  stats << "scene,camera,segments,boundary_length\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string dir = out_ + "/" + scene_dir_name(static_cast<int>(i));
    std::filesystem::create_directories(dir);
    for (std::size_t c = 0; c < scenes[i].images.size(); ++c) {
      const SuperpixelPartition part = segment_image(scenes[i].images[c]);
      write_partition_pgm(dir + "/cam_" + std::to_string(c) + "_labels.pgm", part);
      const PartitionStats ps = partition_stats(part);
      stats << i << "," << c << "," << part.num_segments << ","
            << ps.boundary_length << "\n";
    }
  }
}

void Pipeline::pretrain_cmd() {
  std::filesystem::create_directories(out_);
  const std::vector<Scene> scenes = build_scenes();
  const std::vector<TrainScene> train = build_train_scenes(scenes);

  const PretrainResult result =
      pretrain(train, cfg_.dims, cfg_.augment, cfg_.loss, cfg_.optimizer,
               cfg_.voxel, cfg_.seed, cfg_.threads);

  save_params(checkpoint_blob_path(), checkpoint_sidecar_path(), result.params,
              cfg_.dims);

  std::ofstream csv(out_ + "/loss_history.csv");
  if (!csv) fail("cannot open for writing: " + out_ + "/loss_history.csv");
  csv << "epoch,lr,mean_loss,pair_count\n";
  for (std::size_t t = 0; t < result.history.size(); ++t) {
    const EpochStats& row = result.history[t];
    csv << t << "," << format_double(row.lr) << "," << format_double(row.mean_loss)
        << "," << row.pair_count << "\n";
  }
}

void Pipeline::probe_cmd() {
  std::filesystem::create_directories(out_);
  ModelDims dims = cfg_.dims;
  const HeadParams params =
      load_params(checkpoint_blob_path(), checkpoint_sidecar_path(), dims);

  const std::vector<Scene> scenes = build_scenes();
  Eigen::Index total = 0;
  for (const Scene& sc : scenes) total += sc.cloud.size();
  Eigen::MatrixXd features(total, dims.d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (const Scene& sc : scenes) {
    if (!sc.cloud.has_labels()) fail("scene has no labels for probing");
    features.middleRows(row, sc.cloud.size()) = trunk_features(sc, params);
    labels.insert(labels.end(), sc.cloud.labels.begin(), sc.cloud.labels.end());
    row += sc.cloud.size();
  }

  const ProbeResult probe =
      linear_probe(features, labels, cfg_.probe, derive_seed(cfg_.seed, kProbeStream));

  std::ofstream csv(out_ + "/probe_metrics.csv");
  if (!csv) fail("cannot open for writing: " + out_ + "/probe_metrics.csv");
  csv << "epoch,loss,acc,miou\n";
  for (const ProbeEpoch& e : probe.history)
    csv << e.epoch << "," << format_double(e.loss) << "," << format_double(e.accuracy)
        << "," << format_double(e.miou) << "\n";
}

void Pipeline::simmap_cmd() {
  std::filesystem::create_directories(out_);
  ModelDims dims = cfg_.dims;
  const HeadParams params =
      load_params(checkpoint_blob_path(), checkpoint_sidecar_path(), dims);

  const Scene scene = [&] {
    if (cfg_.paths.data.empty())
      return generate_scene(cfg_.scene,
                            derive_seed(cfg_.seed, kSceneStream,
                                        static_cast<std::uint64_t>(cfg_.simmap.scene)));
    return read_scene_dir(cfg_.paths.data + "/" + scene_dir_name(cfg_.simmap.scene));
  }();

  const CylVoxelization vox = cylindrical_voxelize(scene.cloud, cfg_.voxel);
  const Eigen::MatrixXd desc = point_descriptor(scene.cloud, vox);
  const TrunkForward trunk = trainable_point_net(desc, params.trunk);
  const PointHeadForward phead = point_head(trunk.features, params.point_head);

  std::int64_t query = cfg_.simmap.query_point;
  if (query < 0) {
    query = 0;
    for (Eigen::Index i = 0; i < scene.cloud.size(); ++i)
      if (!scene.cloud.labels.empty() &&
          scene.cloud.labels[static_cast<std::size_t>(i)] != kClassGround) {
        query = i;
        break;
      }
  }
  if (query >= scene.cloud.size()) fail("simmap.query_point out of range");
  const Eigen::VectorXd q = phead.out.row(query).transpose();

  // image similarity map
  const Image& img = scene.images[static_cast<std::size_t>(cfg_.simmap.camera)];
  const FeatureGrid fm = toy_image_backbone(img, dims.e);
  const ImageHeadForward ihead = image_head(fm, params.image_head);
  const int w = ihead.out.width, h = ihead.out.height;
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(w) * h, dims.f);
  for (int p = 0; p < w * h; ++p)
    targets.row(p) = Eigen::Map<const Eigen::VectorXd>(
                         ihead.out.data.data() + static_cast<std::size_t>(p) * dims.f,
                         dims.f)
                         .transpose();
  const Eigen::VectorXd image_sims = similarity_map(q, targets);

  std::vector<std::uint16_t> heat(static_cast<std::size_t>(w) * h);
  for (int p = 0; p < w * h; ++p)
    heat[static_cast<std::size_t>(p)] = static_cast<std::uint16_t>(
        std::lround((image_sims(p) + 1.0) / 2.0 * 65535.0));
  write_pgm16(out_ + "/simmap_image.pgm", heat, w, h);

  {
    std::ofstream csv(out_ + "/simmap_image.csv");
    if (!csv) fail("cannot open for writing: " + out_ + "/simmap_image.csv");
    csv << "x,y,similarity\n";
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        csv << x << "," << y << "," << format_double(image_sims(y * w + x)) << "\n";
  }
  {
    const Eigen::VectorXd point_sims = similarity_map(q, phead.out);
    std::ofstream csv(out_ + "/simmap_points.csv");
    if (!csv) fail("cannot open for writing: " + out_ + "/simmap_points.csv");
    csv << "i,x,y,z,similarity\n";
    for (Eigen::Index i = 0; i < scene.cloud.size(); ++i)
      csv << i << "," << format_double(scene.cloud.points(i, 0)) << ","
          << format_double(scene.cloud.points(i, 1)) << ","
          << format_double(scene.cloud.points(i, 2)) << ","
          << format_double(point_sims(i)) << "\n";
  }
}

void Pipeline::gradcheck_cmd() {
  bool all_passed = true;
  for (int s = 0; s < 3; ++s) {
    const GradCheckReport report =
        gradient_check(cfg_.seed + static_cast<std::uint64_t>(s), 1e-4,
                       LossConfig::Mode::superpixel);
    std::cout << "gradcheck seed " << cfg_.seed + static_cast<std::uint64_t>(s)
              << " superpixel: max rel error " << format_double(report.max_rel_error)
              << (report.passed ? " PASS" : " FAIL") << "\n";
    for (const auto& [name, err] : report.per_tensor)
      std::cout << "  " << name << ": " << format_double(err) << "\n";
    all_passed = all_passed && report.passed;
  }
  const GradCheckReport pixel_report =
      gradient_check(cfg_.seed, 1e-4, LossConfig::Mode::pixel);
  std::cout << "gradcheck seed " << cfg_.seed << " pixel: max rel error "
            << format_double(pixel_report.max_rel_error)
            << (pixel_report.passed ? " PASS" : " FAIL") << "\n";
  all_passed = all_passed && pixel_report.passed;
  if (!all_passed) fail("gradient check failed");
}

void Pipeline::run(const std::string& command) {
  if (command == "gen")
    gen();
  else if (command == "segment")
    segment();
  else if (command == "pretrain")
    pretrain_cmd();
  else if (command == "probe")
    probe_cmd();
  else if (command == "simmap")
    simmap_cmd();
  else if (command == "gradcheck")
    gradcheck_cmd();
  else
    fail_config("unknown command: " + command);
}

}  // namespace slidr
