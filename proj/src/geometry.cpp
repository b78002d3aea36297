#include "slidr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

namespace slidr {

namespace {

constexpr char kCloudMagic[8] = {'S', 'L', 'P', 'C', '0', '0', '0', '1'};
constexpr double kPi = 3.14159265358979323846;

}  // namespace

void PointCloud::validate(int num_classes) const {
  if (points.rows() < 1) fail("point cloud is empty");
  if (!points.allFinite()) fail("point cloud has non-finite coordinates");
  if (!labels.empty()) {
    if (static_cast<Eigen::Index>(labels.size()) != points.rows())
      fail("label count does not match point count");
    for (int l : labels) {
      if (l < 0 || (num_classes >= 0 && l >= num_classes))
        fail("point label out of range");
    }
  }
}

void CameraModel::validate() const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    fail("camera rotation is not orthonormal");
  if (!(fx > 0.0) || !(fy > 0.0)) fail("camera focal lengths must be positive");
  if (width < 4 || height < 4) fail("camera image must be at least 4x4");
  if (width % 4 != 0 || height % 4 != 0)
    fail("camera image dimensions must be divisible by 4");
}

void CameraRig::validate() const {
  if (cameras.empty()) fail("camera rig has no cameras");
  for (const auto& c : cameras) c.validate();
}

void CylVoxelSpec::validate() const {
  if (!(dz > 0.0) || !(dr > 0.0) || !(dazimuth > 0.0))
    fail("voxel spec entries must be strictly positive");
  const double bins = 360.0 / dazimuth;
  if (std::abs(bins - std::round(bins)) > 1e-9)
    fail("360 must be divisible by the azimuth bin width");
}

int CylVoxelSpec::azimuth_bins() const {
  return static_cast<int>(std::llround(360.0 / dazimuth));
}

std::uint32_t project_point(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = cam.rotation * p + cam.translation;
  if (q.z() <= kNearPlane) return 0;
  const double u = cam.fx * q.x() / q.z() + cam.cx;
  const double v = cam.fy * q.y() / q.z() + cam.cy;
  const double px = std::floor(u + 0.5);  // half-up toward +x
  const double py = std::floor(v + 0.5);
  if (px < 0.0 || px >= cam.width || py < 0.0 || py >= cam.height) return 0;
  const auto ix = static_cast<std::int64_t>(px);
  const auto iy = static_cast<std::int64_t>(py);
  return static_cast<std::uint32_t>(iy * cam.width + ix + 1);
}

PixelMap build_pixel_map(const CameraRig& rig, const PointCloud& cloud,
                         bool zbuffer) {
  rig.validate();
  const Eigen::Index n = cloud.size();
  PixelMap pm;
  pm.num_points = n;
  pm.cameras.reserve(rig.cameras.size());
  for (const CameraModel& cam : rig.cameras) {
    PixelMap::Plane plane;
    plane.width = cam.width;
    plane.height = cam.height;
    plane.pixel.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
      plane.pixel[static_cast<std::size_t>(i)] =
          project_point(cam, cloud.points.row(i).transpose());

    if (zbuffer) {
      // nearest point per pixel wins; earlier index wins exact ties
      std::map<std::uint32_t, Eigen::Index> winner;
      std::vector<double> depth(static_cast<std::size_t>(n), 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint32_t m = plane.pixel[static_cast<std::size_t>(i)];
        if (m == 0) continue;
        const Eigen::Vector3d q =
            cam.rotation * cloud.points.row(i).transpose() + cam.translation;
        depth[static_cast<std::size_t>(i)] = q.z();
        auto it = winner.find(m);
        if (it == winner.end() ||
            q.z() < depth[static_cast<std::size_t>(it->second)])
          winner[m] = i;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint32_t m = plane.pixel[static_cast<std::size_t>(i)];
        if (m != 0 && winner.at(m) != i)
          plane.pixel[static_cast<std::size_t>(i)] = 0;
      }
    }
    pm.cameras.push_back(std::move(plane));
  }
  return pm;
}

CylVoxelization cylindrical_voxelize(const PointCloud& cloud,
                                     const CylVoxelSpec& spec) {
  spec.validate();
  cloud.validate();
  const Eigen::Index n = cloud.size();
  const int azi_bins = spec.azimuth_bins();

  CylVoxelization out;
  out.z_min = cloud.points.col(2).minCoeff();
  out.per_point.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = cloud.points(i, 0);
    const double y = cloud.points(i, 1);
    const double z = cloud.points(i, 2);
    const double r = std::hypot(x, y);
    double az = std::atan2(y, x) * 180.0 / kPi;
    if (az < 0.0) az += 360.0;
    VoxelId id;
    id.radial = static_cast<std::int64_t>(std::floor(r / spec.dr));
    id.azimuth = static_cast<std::int64_t>(std::floor(az / spec.dazimuth));
    if (id.azimuth >= azi_bins) id.azimuth = azi_bins - 1;  // az == 360 - eps
    id.height = static_cast<std::int64_t>(std::floor((z - out.z_min) / spec.dz));
    out.per_point[static_cast<std::size_t>(i)] = id;
  }

  std::map<VoxelId, int> counts;
  for (const VoxelId& id : out.per_point) ++counts[id];
  out.occupied.reserve(counts.size());
  for (const auto& [id, c] : counts) out.occupied.push_back(id);
  out.occupancy.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    out.occupancy[static_cast<std::size_t>(i)] =
        counts.at(out.per_point[static_cast<std::size_t>(i)]);
  return out;
}

void write_point_cloud(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open for writing: " + path);
  f.write(kCloudMagic, sizeof(kCloudMagic));
  const std::uint64_t n = static_cast<std::uint64_t>(cloud.size());
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double row[3] = {cloud.points(i, 0), cloud.points(i, 1),
                           cloud.points(i, 2)};
    f.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (cloud.has_labels()) {
    for (int l : cloud.labels) {
      const std::uint32_t v = static_cast<std::uint32_t>(l);
      f.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!f) fail("write failed: " + path);
}

PointCloud read_point_cloud(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCloudMagic, sizeof(magic)) != 0)
    fail("bad point cloud magic: " + path);
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!f || n == 0) fail("bad point cloud header: " + path);

  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(n), 3);
  for (std::uint64_t i = 0; i < n; ++i) {
    double row[3];
    f.read(reinterpret_cast<char*>(row), sizeof(row));
    if (!f) fail("truncated point cloud: " + path);
    cloud.points(static_cast<Eigen::Index>(i), 0) = row[0];
    cloud.points(static_cast<Eigen::Index>(i), 1) = row[1];
    cloud.points(static_cast<Eigen::Index>(i), 2) = row[2];
  }
  // labels are present iff the file continues
  std::uint32_t probe = 0;
  f.read(reinterpret_cast<char*>(&probe), sizeof(probe));
  if (f) {
    cloud.labels.resize(n);
    cloud.labels[0] = static_cast<int>(probe);
    for (std::uint64_t i = 1; i < n; ++i) {
      std::uint32_t v = 0;
      f.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!f) fail("truncated labels: " + path);
      cloud.labels[i] = static_cast<int>(v);
    }
  }
  cloud.validate();
  return cloud;
}

void write_camera_rig(const std::string& path, const CameraRig& rig) {
  rig.validate();
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (const CameraModel& c : rig.cameras) {
    nlohmann::json jc;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) rot[static_cast<std::size_t>(r * 3 + k)] = c.rotation(r, k);
    jc["rotation"] = rot;
    jc["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["width"] = c.width;
    jc["height"] = c.height;
    doc["cameras"].push_back(jc);
  }
  std::ofstream f(path);
  if (!f) fail("cannot open for writing: " + path);
  f << doc.dump(2) << "\n";
}

CameraRig read_camera_rig(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open: " + path);
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("bad calibration json: " + std::string(e.what()));
  }
  CameraRig rig;
  if (!doc.contains("cameras") || !doc["cameras"].is_array())
    fail("calibration json has no cameras array");
  for (const auto& jc : doc["cameras"]) {
    CameraModel c;
    const auto rot = jc.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) fail("rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot[static_cast<std::size_t>(r * 3 + k)];
    const auto tr = jc.at("translation").get<std::vector<double>>();
    if (tr.size() != 3) fail("translation must have 3 entries");
    c.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
    c.fx = jc.at("fx").get<double>();
    c.fy = jc.at("fy").get<double>();
    c.cx = jc.at("cx").get<double>();
    c.cy = jc.at("cy").get<double>();
    c.width = jc.at("width").get<int>();
    c.height = jc.at("height").get<int>();
    rig.cameras.push_back(c);
  }
  rig.validate();
  return rig;
}

}  // namespace slidr
