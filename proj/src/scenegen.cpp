#include "slidr/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace slidr {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;

constexpr std::uint64_t kObjectStream = 11;
constexpr std::uint64_t kDropStream = 12;
constexpr std::uint64_t kTileStream = 13;

struct Box {
  Eigen::Vector3d lo, hi;
  Eigen::Vector3d color;
};

struct Pole {
  double cx = 0, cy = 0, radius = 0, z0 = 0, z1 = 0;
  Eigen::Vector3d color;
};

struct Hit {
  double t = 0;
  int cls = -1;                 // -1 = miss
  Eigen::Vector3d color = {0, 0, 0};
};

struct World {
  double ground_z = 0;
  double tile = 4.0;
  double hue_jitter = 0.08;
  std::uint64_t seed = 0;
  std::vector<Box> boxes;
  std::vector<Pole> poles;

  Eigen::Vector3d ground_color(double x, double y) const {
    const auto ti = static_cast<std::int64_t>(std::floor(x / tile));
    const auto tj = static_cast<std::int64_t>(std::floor(y / tile));
    Rng rng(derive_seed(seed, kTileStream, static_cast<std::uint64_t>(ti + (1LL << 31)),
                        static_cast<std::uint64_t>(tj + (1LL << 31))));
    Eigen::Vector3d c(0.35, 0.38, 0.33);
    for (int k = 0; k < 3; ++k)
      c[k] = std::clamp(c[k] + rng.uniform(-hue_jitter, hue_jitter), 0.05, 0.95);
    return c;
  }
};

bool intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                   const Box& box, double& t) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < box.lo[a] || o[a] > box.hi[a]) return false;
      continue;
    }
    double t0 = (box.lo[a] - o[a]) / d[a];
    double t1 = (box.hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  if (tmax < kRayEps) return false;
  t = tmin > kRayEps ? tmin : tmax;
  return true;
}

bool intersect_pole(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                    const Pole& pole, double& t) {
  double best = std::numeric_limits<double>::infinity();
  const double ox = o.x() - pole.cx, oy = o.y() - pole.cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15) {
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double c = ox * ox + oy * oy - pole.radius * pole.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (const double cand : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (cand < kRayEps) continue;
        const double z = o.z() + cand * d.z();
        if (z >= pole.z0 && z <= pole.z1) best = std::min(best, cand);
      }
    }
  }
  if (std::abs(d.z()) > 1e-15) {  // top cap
    const double cand = (pole.z1 - o.z()) / d.z();
    if (cand > kRayEps) {
      const double x = o.x() + cand * d.x() - pole.cx;
      const double y = o.y() + cand * d.y() - pole.cy;
      if (x * x + y * y <= pole.radius * pole.radius) best = std::min(best, cand);
    }
  }
  if (!std::isfinite(best)) return false;
  t = best;
  return true;
}

Hit raycast(const World& world, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
            double max_range) {
  Hit hit;
  double best = max_range;
  if (d.z() < -1e-15) {
    const double t = (world.ground_z - o.z()) / d.z();
    if (t > kRayEps && t < best) {
      best = t;
      hit.cls = kClassGround;
    }
  }
  int best_box = -1, best_pole = -1;
  for (std::size_t i = 0; i < world.boxes.size(); ++i) {
    double t = 0;
    if (intersect_box(o, d, world.boxes[i], t) && t < best) {
      best = t;
      hit.cls = kClassVehicle;
      best_box = static_cast<int>(i);
      best_pole = -1;
    }
  }
  for (std::size_t i = 0; i < world.poles.size(); ++i) {
    double t = 0;
    if (intersect_pole(o, d, world.poles[i], t) && t < best) {
      best = t;
      hit.cls = kClassPole;
      best_pole = static_cast<int>(i);
      best_box = -1;
    }
  }
  if (hit.cls < 0) return hit;
  hit.t = best;
  if (best_box >= 0)
    hit.color = world.boxes[static_cast<std::size_t>(best_box)].color;
  else if (best_pole >= 0)
    hit.color = world.poles[static_cast<std::size_t>(best_pole)].color;
  else {
    const Eigen::Vector3d p = o + best * d;
    hit.color = world.ground_color(p.x(), p.y());
  }
  return hit;
}

Eigen::Vector3d jitter_color(const Eigen::Vector3d& base, double amount, Rng& rng) {
  Eigen::Vector3d c = base;
  for (int k = 0; k < 3; ++k)
    c[k] = std::clamp(c[k] + rng.uniform(-amount, amount), 0.05, 0.95);
  return c;
}

double quantize8(double v) { return std::lround(v * 255.0) / 255.0; }

}  // namespace

void SceneSpec::validate() const {
  if (num_cameras < 1) fail("scene.num_cameras must be at least 1");
  if (image_width < 4 || image_height < 4 || image_width % 4 != 0 ||
      image_height % 4 != 0)
    fail("scene image dimensions must be at least 4 and divisible by 4");
  if (beams < 1 || azimuth_steps < 1) fail("scene beam pattern must be non-empty");
  if (!(max_range > 0.0) || !(sensor_height > 0.0))
    fail("scene ranges must be positive");
  if (!(hfov_deg > 10.0 && hfov_deg < 179.0)) fail("scene.hfov_deg out of range");
  if (boxes_min < 0 || boxes_max < boxes_min || poles_min < 0 || poles_max < poles_min)
    fail("scene object counts out of order");
  if (dropout < 0.0 || dropout > 1.0) fail("scene.dropout must be in [0,1]");
  if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0)
    fail("scene.corrupt_fraction must be in [0,1]");
  if (!(ground_tile > 0.0)) fail("scene.ground_tile must be positive");
  if (hue_jitter < 0.0 || hue_jitter > 0.5) fail("scene.hue_jitter out of range");
  if (!(placement_radius_max >= placement_radius_min) || placement_radius_min < 0.0)
    fail("scene placement radii out of order");
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();

  World world;
  world.ground_z = -spec.sensor_height;
  world.tile = spec.ground_tile;
  world.hue_jitter = spec.hue_jitter;
  world.seed = seed;

  Rng rng(derive_seed(seed, kObjectStream));
  const Eigen::Vector3d vehicle_base(0.78, 0.22, 0.18);
  const Eigen::Vector3d pole_base(0.20, 0.32, 0.82);

  const int num_boxes =
      spec.boxes_min + static_cast<int>(rng.index(
                           static_cast<std::size_t>(spec.boxes_max - spec.boxes_min) + 1));
  for (int i = 0; i < num_boxes; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double rad = rng.uniform(spec.placement_radius_min, spec.placement_radius_max);
    Eigen::Vector3d size;
    for (int a = 0; a < 3; ++a)
      size[a] = rng.uniform(spec.box_size_min[a], spec.box_size_max[a]);
    Box box;
    const double cx = rad * std::cos(ang), cy = rad * std::sin(ang);
    box.lo = Eigen::Vector3d(cx - size.x() / 2, cy - size.y() / 2, world.ground_z);
    box.hi = Eigen::Vector3d(cx + size.x() / 2, cy + size.y() / 2,
                             world.ground_z + size.z());
    box.color = jitter_color(vehicle_base, spec.hue_jitter, rng);
    world.boxes.push_back(box);
  }
  const int num_poles =
      spec.poles_min + static_cast<int>(rng.index(
                           static_cast<std::size_t>(spec.poles_max - spec.poles_min) + 1));
  for (int i = 0; i < num_poles; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double rad = rng.uniform(spec.placement_radius_min, spec.placement_radius_max);
    Pole pole;
    pole.cx = rad * std::cos(ang);
    pole.cy = rad * std::sin(ang);
    pole.radius = rng.uniform(spec.pole_radius_min, spec.pole_radius_max);
    pole.z0 = world.ground_z;
    pole.z1 = world.ground_z + rng.uniform(spec.pole_height_min, spec.pole_height_max);
    pole.color = jitter_color(pole_base, spec.hue_jitter, rng);
    world.poles.push_back(pole);
  }

  // Lidar sweep from the origin
  Scene scene;
  std::vector<Eigen::Vector3d> points;
  std::vector<int> labels;
  Rng drop_rng(derive_seed(seed, kDropStream));
  for (int b = 0; b < spec.beams; ++b) {
    const double el =
        spec.beams == 1
            ? spec.elevation_min_deg
            : spec.elevation_min_deg + (spec.elevation_max_deg - spec.elevation_min_deg) *
                                           b / (spec.beams - 1);
    const double elr = el * kPi / 180.0;
    for (int a = 0; a < spec.azimuth_steps; ++a) {
      const double az = 2.0 * kPi * a / spec.azimuth_steps;
      const Eigen::Vector3d dir(std::cos(elr) * std::cos(az),
                                std::cos(elr) * std::sin(az), std::sin(elr));
      const Hit hit = raycast(world, Eigen::Vector3d::Zero(), dir, spec.max_range);
      if (hit.cls < 0) continue;
      const double u = drop_rng.uniform();
      if (u < spec.dropout) continue;
      points.push_back(hit.t * dir);
      labels.push_back(hit.cls);
    }
  }
  if (points.empty()) fail("scene too sparse");
  scene.cloud.points.resize(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    scene.cloud.points.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  scene.cloud.labels = labels;

  // cameras fanned around the yaw circle, slightly off the Lidar origin
  const double fx = (spec.image_width / 2.0) / std::tan(spec.hfov_deg * kPi / 360.0);
  for (int c = 0; c < spec.num_cameras; ++c) {
    const double yaw = 2.0 * kPi * c / spec.num_cameras;
    CameraModel cam;
    cam.width = spec.image_width;
    cam.height = spec.image_height;
    cam.fx = fx;
    cam.fy = fx;
    cam.cx = spec.image_width / 2.0 - 0.5;
    cam.cy = spec.image_height / 2.0 - 0.5;
    cam.rotation.row(0) = Eigen::RowVector3d(std::sin(yaw), -std::cos(yaw), 0);
    cam.rotation.row(1) = Eigen::RowVector3d(0, 0, -1);
    cam.rotation.row(2) = Eigen::RowVector3d(std::cos(yaw), std::sin(yaw), 0);
    const Eigen::Vector3d position(0.2 * std::cos(yaw), 0.2 * std::sin(yaw), -0.08);
    cam.translation = -cam.rotation * position;
    scene.rig.cameras.push_back(cam);

    Image img;
    img.width = spec.image_width;
    img.height = spec.image_height;
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    std::vector<int> pix_labels(static_cast<std::size_t>(img.width) * img.height, -1);
    const Eigen::Vector3d sky(0.55, 0.64, 0.78);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const Eigen::Vector3d dir_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
        const Eigen::Vector3d dir = (cam.rotation.transpose() * dir_cam).normalized();
        const Hit hit = raycast(world, position, dir, spec.max_range);
        const Eigen::Vector3d color = hit.cls < 0 ? sky : hit.color;
        for (int k = 0; k < 3; ++k) img.at(x, y, k) = quantize8(color[k]);
        if (hit.cls >= 0)
          pix_labels[static_cast<std::size_t>(y * img.width + x)] = hit.cls;
      }
    scene.images.push_back(std::move(img));
    scene.pixel_labels.push_back(std::move(pix_labels));
  }

  // exact pairs: projection target must carry the same class as the point
  for (Eigen::Index i = 0; i < scene.cloud.size(); ++i) {
    for (int c = 0; c < spec.num_cameras; ++c) {
      const std::uint32_t m =
          project_point(scene.rig.cameras[static_cast<std::size_t>(c)],
                        scene.cloud.points.row(i).transpose());
      if (m == 0) continue;
      if (scene.pixel_labels[static_cast<std::size_t>(c)][m - 1] !=
          scene.cloud.labels[static_cast<std::size_t>(i)])
        continue;
      scene.pairs.push_back({i, c, m});
    }
  }
  if (scene.pairs.size() < 1024) fail("scene too sparse");
  return scene;
}

PairList corrupt_correspondences(const PairList& pairs,
                                 const std::vector<int>& pixels_per_camera,
                                 double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) fail("fraction must be in [0,1]");
  PairList out = pairs;
  const std::size_t n = pairs.size();
  const auto k = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  if (k == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) {
    const int cam = out[i].camera;
    if (cam < 0 || static_cast<std::size_t>(cam) >= pixels_per_camera.size())
      fail("pair camera out of range");
    const int m = pixels_per_camera[static_cast<std::size_t>(cam)];
    out[i].pixel = static_cast<std::uint32_t>(rng.index(static_cast<std::size_t>(m))) + 1;
  }
  return out;
}

void write_scene_dir(const std::string& dir, const Scene& scene) {
  std::filesystem::create_directories(dir);
  write_point_cloud(dir + "/cloud.slpc", scene.cloud);
  for (std::size_t c = 0; c < scene.images.size(); ++c)
    write_ppm(dir + "/cam_" + std::to_string(c) + ".ppm", scene.images[c]);
  write_camera_rig(dir + "/calib.json", scene.rig);
  write_pairs_csv(dir + "/pairs.csv", scene.pairs);
  std::ofstream lf(dir + "/labels.csv");
  if (!lf) fail("cannot open for writing: " + dir + "/labels.csv");
  lf << "i,label\n";
  for (std::size_t i = 0; i < scene.cloud.labels.size(); ++i)
    lf << i << "," << scene.cloud.labels[i] << "\n";
}

Scene read_scene_dir(const std::string& dir) {
  Scene scene;
  scene.cloud = read_point_cloud(dir + "/cloud.slpc");
  scene.rig = read_camera_rig(dir + "/calib.json");
  for (std::size_t c = 0; c < scene.rig.cameras.size(); ++c)
    scene.images.push_back(read_ppm(dir + "/cam_" + std::to_string(c) + ".ppm"));
  scene.pairs = read_pairs_csv(dir + "/pairs.csv");
  return scene;
}

}  // namespace slidr
