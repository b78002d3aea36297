#include "slidr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace slidr {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  fail_config("config field " + path + ": " + why);
}

// object wrapper tracking consumed keys so unknown keys can be rejected
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      fail_config("config section " + (path_.empty() ? "<root>" : path_) +
                  " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    consumed_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      bad_field(path_ + key, "wrong type");
    }
  }

  json child(const char* key) {
    consumed_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? json::object() : *it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!consumed_.count(k)) fail_config("unknown config key: " + path_ + k);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> consumed_;
};

void read_vec3(Section& s, const char* key, Eigen::Vector3d& out,
               const std::string& path) {
  std::vector<double> v{out.x(), out.y(), out.z()};
  s.read(key, v);
  if (v.size() != 3) bad_field(path + key, "needs 3 entries");
  out = Eigen::Vector3d(v[0], v[1], v[2]);
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  // desk-scale benchmark operating point
  cfg.augment.out_width = 64;
  cfg.augment.out_height = 48;
  cfg.probe.num_classes = kNumSceneClasses;
  return cfg;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail_config("config is not valid JSON: " + std::string(e.what()));
  }

  RunConfig cfg = defaults();
  Section root(doc, "");
  root.read("seed", cfg.seed);
  root.read("threads", cfg.threads);
  root.read("num_scenes", cfg.num_scenes);

  {
    Section s(root.child("paths"), "paths.");
    s.read("data", cfg.paths.data);
    s.read("checkpoint", cfg.paths.checkpoint);
    s.finish();
  }
  {
    Section s(root.child("dims"), "dims.");
    s.read("d", cfg.dims.d);
    s.read("e", cfg.dims.e);
    s.read("f", cfg.dims.f);
    s.finish();
  }
  {
    Section s(root.child("scene"), "scene.");
    s.read("num_cameras", cfg.scene.num_cameras);
    s.read("image_width", cfg.scene.image_width);
    s.read("image_height", cfg.scene.image_height);
    s.read("beams", cfg.scene.beams);
    s.read("azimuth_steps", cfg.scene.azimuth_steps);
    s.read("elevation_min_deg", cfg.scene.elevation_min_deg);
    s.read("elevation_max_deg", cfg.scene.elevation_max_deg);
    s.read("max_range", cfg.scene.max_range);
    s.read("sensor_height", cfg.scene.sensor_height);
    s.read("hfov_deg", cfg.scene.hfov_deg);
    s.read("boxes_min", cfg.scene.boxes_min);
    s.read("boxes_max", cfg.scene.boxes_max);
    s.read("poles_min", cfg.scene.poles_min);
    s.read("poles_max", cfg.scene.poles_max);
    read_vec3(s, "box_size_min", cfg.scene.box_size_min, "scene.");
    read_vec3(s, "box_size_max", cfg.scene.box_size_max, "scene.");
    s.read("pole_radius_min", cfg.scene.pole_radius_min);
    s.read("pole_radius_max", cfg.scene.pole_radius_max);
    s.read("pole_height_min", cfg.scene.pole_height_min);
    s.read("pole_height_max", cfg.scene.pole_height_max);
    s.read("placement_radius_min", cfg.scene.placement_radius_min);
    s.read("placement_radius_max", cfg.scene.placement_radius_max);
    s.read("ground_tile", cfg.scene.ground_tile);
    s.read("hue_jitter", cfg.scene.hue_jitter);
    s.read("dropout", cfg.scene.dropout);
    s.read("corrupt_fraction", cfg.scene.corrupt_fraction);
    s.finish();
  }
  {
    Section s(root.child("superpixels"), "superpixels.");
    s.read("algorithm", cfg.superpixels.algorithm);
    s.read("q", cfg.superpixels.q);
    s.read("compactness", cfg.superpixels.compactness);
    s.read("iters", cfg.superpixels.iters);
    s.read("fh_scale", cfg.superpixels.fh_scale);
    s.read("fh_sigma", cfg.superpixels.fh_sigma);
    s.read("fh_min_size", cfg.superpixels.fh_min_size);
    s.finish();
  }
  {
    Section s(root.child("voxel"), "voxel.");
    s.read("dz", cfg.voxel.dz);
    s.read("dr", cfg.voxel.dr);
    s.read("dazimuth", cfg.voxel.dazimuth);
    s.finish();
  }
  {
    Section s(root.child("augment"), "augment.");
    s.read("rotate_z", cfg.augment.rotate_z);
    s.read("flip_x_prob", cfg.augment.flip_x_prob);
    s.read("flip_y_prob", cfg.augment.flip_y_prob);
    s.read("cuboid_max_frac", cfg.augment.cuboid_max_frac);
    s.read("min_pairs", cfg.augment.min_pairs);
    s.read("crop_min_area_frac", cfg.augment.crop_min_area_frac);
    std::vector<double> aspect{cfg.augment.crop_aspect_range[0],
                               cfg.augment.crop_aspect_range[1]};
    s.read("crop_aspect_range", aspect);
    if (aspect.size() != 2) bad_field("augment.crop_aspect_range", "needs 2 entries");
    cfg.augment.crop_aspect_range = {aspect[0], aspect[1]};
    s.read("out_width", cfg.augment.out_width);
    s.read("out_height", cfg.augment.out_height);
    s.read("image_min_pairs", cfg.augment.image_min_pairs);
    s.read("image_min_frac", cfg.augment.image_min_frac);
    s.read("hflip_prob", cfg.augment.hflip_prob);
    s.read("max_resample_attempts", cfg.augment.max_resample_attempts);
    s.finish();
  }
  {
    Section s(root.child("loss"), "loss.");
    s.read("temperature", cfg.loss.temperature);
    std::string mode = cfg.loss.mode == LossConfig::Mode::pixel ? "pixel" : "superpixel";
    s.read("mode", mode);
    if (mode == "superpixel")
      cfg.loss.mode = LossConfig::Mode::superpixel;
    else if (mode == "pixel")
      cfg.loss.mode = LossConfig::Mode::pixel;
    else
      bad_field("loss.mode", "must be \"superpixel\" or \"pixel\"");
    s.read("pixel_sample_size", cfg.loss.pixel_sample_size);
    s.finish();
  }
  {
    Section s(root.child("optimizer"), "optimizer.");
    s.read("lr0", cfg.optimizer.lr0);
    s.read("momentum", cfg.optimizer.momentum);
    s.read("weight_decay", cfg.optimizer.weight_decay);
    s.read("dampening", cfg.optimizer.dampening);
    s.read("epochs", cfg.optimizer.epochs);
    s.read("batch_size", cfg.optimizer.batch_size);
    s.finish();
  }
  {
    Section s(root.child("probe"), "probe.");
    s.read("lr", cfg.probe.lr);
    s.read("epochs", cfg.probe.epochs);
    s.read("num_classes", cfg.probe.num_classes);
    s.finish();
  }
  {
    Section s(root.child("simmap"), "simmap.");
    s.read("scene", cfg.simmap.scene);
    s.read("camera", cfg.simmap.camera);
    s.read("query_point", cfg.simmap.query_point);
    s.finish();
  }
  root.finish();

  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail_config("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
  json doc;
  doc["seed"] = seed;
  doc["threads"] = threads;
  doc["num_scenes"] = num_scenes;
  doc["paths"] = {{"data", paths.data}, {"checkpoint", paths.checkpoint}};
  doc["dims"] = {{"d", dims.d}, {"e", dims.e}, {"f", dims.f}};
  doc["scene"] = {
      {"num_cameras", scene.num_cameras},
      {"image_width", scene.image_width},
      {"image_height", scene.image_height},
      {"beams", scene.beams},
      {"azimuth_steps", scene.azimuth_steps},
      {"elevation_min_deg", scene.elevation_min_deg},
      {"elevation_max_deg", scene.elevation_max_deg},
      {"max_range", scene.max_range},
      {"sensor_height", scene.sensor_height},
      {"hfov_deg", scene.hfov_deg},
      {"boxes_min", scene.boxes_min},
      {"boxes_max", scene.boxes_max},
      {"poles_min", scene.poles_min},
      {"poles_max", scene.poles_max},
      {"box_size_min", {scene.box_size_min.x(), scene.box_size_min.y(), scene.box_size_min.z()}},
      {"box_size_max", {scene.box_size_max.x(), scene.box_size_max.y(), scene.box_size_max.z()}},
      {"pole_radius_min", scene.pole_radius_min},
      {"pole_radius_max", scene.pole_radius_max},
      {"pole_height_min", scene.pole_height_min},
      {"pole_height_max", scene.pole_height_max},
      {"placement_radius_min", scene.placement_radius_min},
      {"placement_radius_max", scene.placement_radius_max},
      {"ground_tile", scene.ground_tile},
      {"hue_jitter", scene.hue_jitter},
      {"dropout", scene.dropout},
      {"corrupt_fraction", scene.corrupt_fraction},
  };
  doc["superpixels"] = {
      {"algorithm", superpixels.algorithm},   {"q", superpixels.q},
      {"compactness", superpixels.compactness}, {"iters", superpixels.iters},
      {"fh_scale", superpixels.fh_scale},     {"fh_sigma", superpixels.fh_sigma},
      {"fh_min_size", superpixels.fh_min_size},
  };
  doc["voxel"] = {{"dz", voxel.dz}, {"dr", voxel.dr}, {"dazimuth", voxel.dazimuth}};
  doc["augment"] = {
      {"rotate_z", augment.rotate_z},
      {"flip_x_prob", augment.flip_x_prob},
      {"flip_y_prob", augment.flip_y_prob},
      {"cuboid_max_frac", augment.cuboid_max_frac},
      {"min_pairs", augment.min_pairs},
      {"crop_min_area_frac", augment.crop_min_area_frac},
      {"crop_aspect_range", {augment.crop_aspect_range[0], augment.crop_aspect_range[1]}},
      {"out_width", augment.out_width},
      {"out_height", augment.out_height},
      {"image_min_pairs", augment.image_min_pairs},
      {"image_min_frac", augment.image_min_frac},
      {"hflip_prob", augment.hflip_prob},
      {"max_resample_attempts", augment.max_resample_attempts},
  };
  doc["loss"] = {
      {"temperature", loss.temperature},
      {"mode", loss.mode == LossConfig::Mode::pixel ? "pixel" : "superpixel"},
      {"pixel_sample_size", loss.pixel_sample_size},
  };
  doc["optimizer"] = {
      {"lr0", optimizer.lr0},
      {"momentum", optimizer.momentum},
      {"weight_decay", optimizer.weight_decay},
      {"dampening", optimizer.dampening},
      {"epochs", optimizer.epochs},
      {"batch_size", optimizer.batch_size},
  };
  doc["probe"] = {{"lr", probe.lr}, {"epochs", probe.epochs},
                  {"num_classes", probe.num_classes}};
  doc["simmap"] = {{"scene", simmap.scene}, {"camera", simmap.camera},
                   {"query_point", simmap.query_point}};
  return doc.dump(2);
}

void RunConfig::set_path(const std::string& key_path, const std::string& value) {
  json doc = json::parse(to_json_text());
  json* node = &doc;
  std::string part;
  std::istringstream ss(key_path);
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) fail_config("empty --set key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
    if (!node->is_object()) fail_config("unknown config key: " + key_path);
  }
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    v = value;
  }
  (*node)[parts.back()] = v;
  *this = from_json_text(doc.dump());
}

void RunConfig::validate() const {
  if (threads < 1) bad_field("threads", "must be at least 1");
  if (num_scenes < 1) bad_field("num_scenes", "must be at least 1");
  if (dims.d < 2) bad_field("dims.d", "must be at least 2");
  if (dims.e < 2) bad_field("dims.e", "must be at least 2");
  if (dims.f < 2) bad_field("dims.f", "must be at least 2");
  if (superpixels.algorithm != "slic" && superpixels.algorithm != "fh")
    bad_field("superpixels.algorithm", "must be \"slic\" or \"fh\"");
  if (superpixels.q < 1) bad_field("superpixels.q", "must be at least 1");
  if (!(superpixels.compactness > 0.0))
    bad_field("superpixels.compactness", "must be positive");
  if (superpixels.iters < 1) bad_field("superpixels.iters", "must be at least 1");
  if (!(superpixels.fh_scale > 0.0)) bad_field("superpixels.fh_scale", "must be positive");
  if (superpixels.fh_sigma < 0.0)
    bad_field("superpixels.fh_sigma", "must be non-negative");
  if (superpixels.fh_min_size < 1)
    bad_field("superpixels.fh_min_size", "must be at least 1");
  if (augment.out_width % 4 != 0 || augment.out_height % 4 != 0 ||
      augment.out_width < 4 || augment.out_height < 4)
    bad_field("augment.out_width/out_height",
              "must be at least 4 and divisible by 4");
  if (simmap.scene < 0 || simmap.scene >= num_scenes)
    bad_field("simmap.scene", "out of range");
  if (simmap.camera < 0 || simmap.camera >= scene.num_cameras)
    bad_field("simmap.camera", "out of range");

  // module invariants; their messages already carry the field path
  try {
    scene.validate();
    voxel.validate();
    augment.validate();
    loss.validate();
    optimizer.validate();
    probe.validate();
  } catch (const Error& e) {
    fail_config(e.what());
  }
}

}  // namespace slidr
