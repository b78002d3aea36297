#include "slidr/augment.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace slidr {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void rotate_flip(const Eigen::MatrixX3d& in, const PointTransformRecord& rec,
                 Eigen::MatrixX3d& out) {
  const double c = std::cos(rec.theta), s = std::sin(rec.theta);
  const double sx = rec.flip_x ? -1.0 : 1.0;
  const double sy = rec.flip_y ? -1.0 : 1.0;
  out.resize(in.rows(), 3);
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    const double x = in(i, 0), y = in(i, 1);
    out(i, 0) = sx * (c * x - s * y);
    out(i, 1) = sy * (s * x + c * y);
    out(i, 2) = in(i, 2);
  }
}

bool inside_cuboid(const Eigen::Vector3d& p, const CuboidRecord& c) {
  return std::abs(p.x() - c.center.x()) <= c.half_sides.x() &&
         std::abs(p.y() - c.center.y()) <= c.half_sides.y() &&
         std::abs(p.z() - c.center.z()) <= c.half_sides.z();
}

}  // namespace

void AugmentConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_x_prob)) fail("augment.flip_x_prob must be in [0,1]");
  if (!prob(flip_y_prob)) fail("augment.flip_y_prob must be in [0,1]");
  if (!prob(hflip_prob)) fail("augment.hflip_prob must be in [0,1]");
  auto frac = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!frac(cuboid_max_frac)) fail("augment.cuboid_max_frac must be in (0,1]");
  if (!frac(crop_min_area_frac)) fail("augment.crop_min_area_frac must be in (0,1]");
  if (!frac(image_min_frac)) fail("augment.image_min_frac must be in (0,1]");
  if (!(crop_aspect_range[0] > 0.0) || !(crop_aspect_range[1] >= crop_aspect_range[0]))
    fail("augment.crop_aspect_range must be ordered and positive");
  if (out_width < 1 || out_height < 1)
    fail("augment.out_width/out_height must be positive");
  if (min_pairs < 0) fail("augment.min_pairs must be non-negative");
  if (image_min_pairs < 0) fail("augment.image_min_pairs must be non-negative");
  if (max_resample_attempts < 1)
    fail("augment.max_resample_attempts must be at least 1");
}

PointCloud apply_point_transform(const PointCloud& cloud,
                                 const PointTransformRecord& rec,
                                 std::vector<std::int64_t>* index_map) {
  Eigen::MatrixX3d moved;
  rotate_flip(cloud.points, rec, moved);

  const Eigen::Index n = moved.rows();
  std::vector<std::int64_t> map(static_cast<std::size_t>(n), -1);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!inside_cuboid(moved.row(i).transpose(), rec.cuboid))
      map[static_cast<std::size_t>(i)] = kept++;

  PointCloud out;
  out.points.resize(kept, 3);
  if (cloud.has_labels()) out.labels.resize(static_cast<std::size_t>(kept));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int64_t j = map[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    out.points.row(j) = moved.row(i);
    if (cloud.has_labels())
      out.labels[static_cast<std::size_t>(j)] = cloud.labels[static_cast<std::size_t>(i)];
  }
  if (index_map) *index_map = std::move(map);
  return out;
}

PointAugmentResult augment_point_cloud(const PointCloud& cloud,
                                       const PairList& pairs,
                                       const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  cloud.validate();
  const Eigen::Index n = cloud.size();
  for (const Pair& p : pairs)
    if (p.point < 0 || p.point >= n) fail("pair references a missing point");

  PointTransformRecord rec;
  rec.theta = cfg.rotate_z ? rng.uniform(0.0, kTwoPi) : 0.0;
  rec.flip_x = rng.bernoulli(cfg.flip_x_prob);
  rec.flip_y = rng.bernoulli(cfg.flip_y_prob);

  Eigen::MatrixX3d moved;
  rotate_flip(cloud.points, rec, moved);
  const Eigen::Vector3d lo = moved.colwise().minCoeff().transpose();
  const Eigen::Vector3d hi = moved.colwise().maxCoeff().transpose();
  const Eigen::Vector3d range = hi - lo;

  for (int attempt = 1; attempt <= cfg.max_resample_attempts; ++attempt) {
    CuboidRecord cuboid;
    const std::size_t anchor = rng.index(static_cast<std::size_t>(n));
    cuboid.center = moved.row(static_cast<Eigen::Index>(anchor)).transpose();
    for (int a = 0; a < 3; ++a)
      cuboid.half_sides[a] = 0.5 * rng.uniform(0.0, cfg.cuboid_max_frac * range[a]);

    std::int64_t survivors = 0;
    for (const Pair& p : pairs)
      if (!inside_cuboid(moved.row(p.point).transpose(), cuboid)) ++survivors;
    if (survivors < cfg.min_pairs) continue;

    rec.cuboid = cuboid;
    rec.attempts = attempt;
    PointAugmentResult result;
    result.record = rec;
    result.cloud = apply_point_transform(cloud, rec, &result.index_map);
    result.pairs.reserve(static_cast<std::size_t>(survivors));
    for (const Pair& p : pairs) {
      const std::int64_t j = result.index_map[static_cast<std::size_t>(p.point)];
      if (j >= 0) result.pairs.push_back({j, p.camera, p.pixel});
    }
    return result;
  }
  fail("cannot satisfy pair constraint");
}

ImageAugmentResult apply_image_transform(const Image& img,
                                         const SuperpixelPartition& part,
                                         const PairList& camera_pairs,
                                         const CropRecord& rec, int out_width,
                                         int out_height) {
  img.validate();
  if (part.width != img.width || part.height != img.height)
    fail("partition does not match image size");
  if (rec.x < 0 || rec.y < 0 || rec.w < 1 || rec.h < 1 ||
      rec.x + rec.w > img.width || rec.y + rec.h > img.height)
    fail("crop out of bounds");

  const int w = img.width;
  auto src_x = [&](int xf) { return rec.flipped ? w - 1 - xf : xf; };

  const double scale_x = static_cast<double>(rec.w) / out_width;
  const double scale_y = static_cast<double>(rec.h) / out_height;

  ImageAugmentResult result;
  result.record = rec;
  result.image.width = out_width;
  result.image.height = out_height;
  result.image.rgb.resize(static_cast<std::size_t>(out_width) * out_height * 3);

  std::vector<std::int32_t> raw_labels(static_cast<std::size_t>(out_width) * out_height);
  for (int dy = 0; dy < out_height; ++dy)
    for (int dx = 0; dx < out_width; ++dx) {
      // crop-local coordinates, sample-center convention, clamped to the crop
      const double sx = std::clamp((dx + 0.5) * scale_x - 0.5, 0.0, rec.w - 1.0);
      const double sy = std::clamp((dy + 0.5) * scale_y - 0.5, 0.0, rec.h - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, rec.w - 1);
      const int y1 = std::min(y0 + 1, rec.h - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v00 = img.at(src_x(rec.x + x0), rec.y + y0, c);
        const double v10 = img.at(src_x(rec.x + x1), rec.y + y0, c);
        const double v01 = img.at(src_x(rec.x + x0), rec.y + y1, c);
        const double v11 = img.at(src_x(rec.x + x1), rec.y + y1, c);
        const double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) +
                         fy * ((1 - fx) * v01 + fx * v11);
        result.image.rgb[(static_cast<std::size_t>(dy) * out_width + dx) * 3 + c] =
            std::clamp(v, 0.0, 1.0);
      }
      const int nx = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, rec.w - 1);
      const int nyp = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, rec.h - 1);
      raw_labels[static_cast<std::size_t>(dy) * out_width + dx] =
          part.label(src_x(rec.x + nx), rec.y + nyp);
    }

  // relabel to contiguous ids (ascending original label)
  std::vector<std::int32_t> remap(static_cast<std::size_t>(part.num_segments), -1);
  for (std::int32_t l : raw_labels) remap[static_cast<std::size_t>(l)] = 0;
  std::int32_t next = 0;
  for (std::size_t l = 0; l < remap.size(); ++l)
    if (remap[l] == 0) remap[l] = next++;
    else remap[l] = -1;
  result.partition.width = out_width;
  result.partition.height = out_height;
  result.partition.num_segments = next;
  result.partition.labels.resize(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i)
    result.partition.labels[i] = remap[static_cast<std::size_t>(raw_labels[i])];

  // pairs: keep those whose pixel center lies inside the crop, remap through
  // the inverse coordinate map to the nearest output pixel
  for (const Pair& p : camera_pairs) {
    if (p.pixel == 0 || p.pixel > static_cast<std::uint32_t>(img.width) * img.height)
      fail("pair pixel out of range");
    const std::int64_t flat = static_cast<std::int64_t>(p.pixel) - 1;
    int px = static_cast<int>(flat % img.width);
    const int py = static_cast<int>(flat / img.width);
    if (rec.flipped) px = w - 1 - px;
    if (px < rec.x || px >= rec.x + rec.w || py < rec.y || py >= rec.y + rec.h)
      continue;
    const double ox = (px - rec.x + 0.5) / scale_x - 0.5;
    const double oy = (py - rec.y + 0.5) / scale_y - 0.5;
    const int dx = std::clamp(static_cast<int>(std::floor(ox + 0.5)), 0, out_width - 1);
    const int dy = std::clamp(static_cast<int>(std::floor(oy + 0.5)), 0, out_height - 1);
    result.pairs.push_back(
        {p.point, p.camera,
         static_cast<std::uint32_t>(dy * out_width + dx + 1)});
  }
  return result;
}

ImageAugmentResult augment_image(const Image& img, const SuperpixelPartition& part,
                                 const PairList& camera_pairs,
                                 const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  img.validate();
  const int w = img.width, h = img.height;
  const double m_pixels = static_cast<double>(w) * h;
  const double min_area = cfg.crop_min_area_frac * m_pixels;
  const double threshold =
      std::max(static_cast<double>(cfg.image_min_pairs),
               cfg.image_min_frac * static_cast<double>(camera_pairs.size()));

  const bool flipped = rng.bernoulli(cfg.hflip_prob);

  for (int attempt = 1; attempt <= cfg.max_resample_attempts; ++attempt) {
    const double aspect = rng.uniform(cfg.crop_aspect_range[0], cfg.crop_aspect_range[1]);
    const double area = rng.uniform(cfg.crop_min_area_frac, 1.0) * m_pixels;
    const int cw = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    const int ch = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    if (cw < 1 || ch < 1 || cw > w || ch > h) continue;
    const double actual_aspect = static_cast<double>(cw) / ch;
    if (actual_aspect < cfg.crop_aspect_range[0] ||
        actual_aspect > cfg.crop_aspect_range[1])
      continue;
    if (static_cast<double>(cw) * ch < min_area) continue;

    CropRecord rec;
    rec.w = cw;
    rec.h = ch;
    rec.x = static_cast<int>(rng.index(static_cast<std::size_t>(w - cw + 1)));
    rec.y = static_cast<int>(rng.index(static_cast<std::size_t>(h - ch + 1)));
    rec.flipped = flipped;
    rec.attempts = attempt;

    std::int64_t survivors = 0;
    for (const Pair& p : camera_pairs) {
      const std::int64_t flat = static_cast<std::int64_t>(p.pixel) - 1;
      int px = static_cast<int>(flat % w);
      const int py = static_cast<int>(flat / w);
      if (rec.flipped) px = w - 1 - px;
      if (px >= rec.x && px < rec.x + rec.w && py >= rec.y && py < rec.y + rec.h)
        ++survivors;
    }
    if (static_cast<double>(survivors) < threshold) continue;

    return apply_image_transform(img, part, camera_pairs, rec, cfg.out_width,
                                 cfg.out_height);
  }
  fail("cannot satisfy pair constraint");
}

std::string point_transform_to_json(const PointTransformRecord& rec) {
  nlohmann::json doc;
  doc["theta"] = rec.theta;
  doc["flip_x"] = rec.flip_x;
  doc["flip_y"] = rec.flip_y;
  doc["cuboid"]["center"] = {rec.cuboid.center.x(), rec.cuboid.center.y(),
                             rec.cuboid.center.z()};
  doc["cuboid"]["half_sides"] = {rec.cuboid.half_sides.x(),
                                 rec.cuboid.half_sides.y(),
                                 rec.cuboid.half_sides.z()};
  return doc.dump();
}

PointTransformRecord point_transform_from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  PointTransformRecord rec;
  rec.theta = doc.at("theta").get<double>();
  rec.flip_x = doc.at("flip_x").get<bool>();
  rec.flip_y = doc.at("flip_y").get<bool>();
  const auto c = doc.at("cuboid").at("center").get<std::vector<double>>();
  const auto s = doc.at("cuboid").at("half_sides").get<std::vector<double>>();
  if (c.size() != 3 || s.size() != 3) fail("bad cuboid record");
  rec.cuboid.center = Eigen::Vector3d(c[0], c[1], c[2]);
  rec.cuboid.half_sides = Eigen::Vector3d(s[0], s[1], s[2]);
  return rec;
}

std::string crop_to_json(const CropRecord& rec) {
  nlohmann::json doc;
  doc["crop"] = {{"x", rec.x}, {"y", rec.y}, {"w", rec.w}, {"h", rec.h},
                 {"flipped", rec.flipped}};
  return doc.dump();
}

CropRecord crop_from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  const auto& jc = doc.at("crop");
  CropRecord rec;
  rec.x = jc.at("x").get<int>();
  rec.y = jc.at("y").get<int>();
  rec.w = jc.at("w").get<int>();
  rec.h = jc.at("h").get<int>();
  rec.flipped = jc.at("flipped").get<bool>();
  return rec;
}

}  // namespace slidr
