#include "slidr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace slidr {

namespace {

constexpr std::uint64_t kBackboneSeed = 0x51a9b0c0ffee1234ULL;
constexpr int kPatch = 4;
constexpr int kStatChannels = 8;

double uniform_sym(Rng& rng, double a) { return rng.uniform(-a, a); }

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

void ModelDims::validate() const {
  if (d < 2 || e < 2 || f < 2) fail("model dims must be at least 2");
}

FeatureGrid toy_image_backbone(const Image& img, int e) {
  img.validate();
  if (e < 2) fail("feature width must be at least 2");
  if (img.width % kPatch != 0 || img.height % kPatch != 0)
    fail("image dimensions must be divisible by 4");
  const int gw = img.width / kPatch;
  const int gh = img.height / kPatch;

  // fixed random projections, regenerated deterministically from a build
  // constant so the backbone stays parameter-free
  const int num_proj = std::max(0, e - kStatChannels);
  std::vector<double> proj(static_cast<std::size_t>(num_proj) * kPatch * kPatch * 3);
  {
    std::uint64_t s = kBackboneSeed;
    Rng rng(splitmix64(s));
    for (auto& w : proj) w = uniform_sym(rng, 1.0);
  }
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(kPatch * kPatch * 3));

  FeatureGrid out = FeatureGrid::zeros(gw, gh, e);
  std::array<double, kPatch * kPatch * 3> patch{};
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      for (int py = 0; py < kPatch; ++py)
        for (int px = 0; px < kPatch; ++px)
          for (int c = 0; c < 3; ++c)
            patch[static_cast<std::size_t>((py * kPatch + px) * 3 + c)] =
                img.at(gx * kPatch + px, gy * kPatch + py, c);

      double stats[kStatChannels] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int p = 0; p < kPatch * kPatch; ++p) {
          const double v = patch[static_cast<std::size_t>(p * 3 + c)];
          sum += v;
          sq += v * v;
        }
        const double mean = sum / (kPatch * kPatch);
        stats[c] = mean;
        stats[3 + c] = std::sqrt(std::max(0.0, sq / (kPatch * kPatch) - mean * mean));
      }
      double gh_sum = 0.0, gv_sum = 0.0;
      for (int py = 0; py < kPatch; ++py)
        for (int px = 0; px < kPatch; ++px)
          for (int c = 0; c < 3; ++c) {
            const double v = patch[static_cast<std::size_t>((py * kPatch + px) * 3 + c)];
            if (px + 1 < kPatch)
              gh_sum += std::abs(
                  patch[static_cast<std::size_t>((py * kPatch + px + 1) * 3 + c)] - v);
            if (py + 1 < kPatch)
              gv_sum += std::abs(
                  patch[static_cast<std::size_t>(((py + 1) * kPatch + px) * 3 + c)] - v);
          }
      stats[6] = gh_sum / (kPatch * (kPatch - 1) * 3);
      stats[7] = gv_sum / (kPatch * (kPatch - 1) * 3);

      double* cell = out.at(gx, gy);
      for (int c = 0; c < std::min(e, kStatChannels); ++c) cell[c] = stats[c];
      for (int k = 0; k < num_proj; ++k) {
        double v = 0.0;
        const double* w = proj.data() + static_cast<std::size_t>(k) * kPatch * kPatch * 3;
        for (int p = 0; p < kPatch * kPatch * 3; ++p) v += w[p] * patch[static_cast<std::size_t>(p)];
        cell[kStatChannels + k] = v * proj_scale;
      }
    }
  return out;
}

Eigen::MatrixXd point_descriptor(const PointCloud& cloud,
                                 const CylVoxelization& voxels) {
  cloud.validate();
  const Eigen::Index n = cloud.size();
  if (static_cast<Eigen::Index>(voxels.per_point.size()) != n)
    fail("voxelization does not match cloud");

  constexpr double kRadius = 0.5;
  std::unordered_map<CellKey, std::vector<Eigen::Index>, CellHash> grid;
  auto cell_of = [&](Eigen::Index i) {
    return CellKey{static_cast<std::int64_t>(std::floor(cloud.points(i, 0) / kRadius)),
                   static_cast<std::int64_t>(std::floor(cloud.points(i, 1) / kRadius)),
                   static_cast<std::int64_t>(std::floor(cloud.points(i, 2) / kRadius))};
  };
  for (Eigen::Index i = 0; i < n; ++i) grid[cell_of(i)].push_back(i);

  const double z_min = cloud.points.col(2).minCoeff();
  Eigen::MatrixXd desc(n, kDescriptorWidth);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = cloud.points(i, 0);
    const double y = cloud.points(i, 1);
    const double z = cloud.points(i, 2);
    const double r = std::hypot(x, y);
    const double az = std::atan2(y, x);

    int density = 0;
    const CellKey base = cell_of(i);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({base.x + dx, base.y + dy, base.z + dz});
          if (it == grid.end()) continue;
          for (Eigen::Index j : it->second) {
            const double ddx = cloud.points(j, 0) - x;
            const double ddy = cloud.points(j, 1) - y;
            const double ddz = cloud.points(j, 2) - z;
            if (ddx * ddx + ddy * ddy + ddz * ddz <= kRadius * kRadius) ++density;
          }
        }

    desc(i, 0) = r;
    desc(i, 1) = z;
    desc(i, 2) = std::sin(az);
    desc(i, 3) = std::cos(az);
    desc(i, 4) = static_cast<double>(voxels.occupancy[static_cast<std::size_t>(i)]);
    desc(i, 5) = static_cast<double>(density);
    desc(i, 6) = z - z_min;
    desc(i, 7) = 0.0;
  }
  return desc;
}

HeadParams HeadParams::init(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  HeadParams p = zeros(dims);

  // first layer scaled per descriptor channel so raw ranges (radius in tens
  // of meters vs unit azimuth terms) enter tanh comparably
  const double nominal[kDescriptorWidth] = {20.0, 2.0, 1.0, 1.0, 8.0, 8.0, 2.0, 1.0};
  const double k_scale = 1.0 / std::sqrt(static_cast<double>(kDescriptorWidth));
  for (int r = 0; r < kDescriptorWidth; ++r)
    for (int c = 0; c < dims.d; ++c)
      p.trunk.w1(r, c) = uniform_sym(rng, k_scale / nominal[r]);

  const double a2 = std::sqrt(6.0 / (dims.d + dims.d));
  for (int r = 0; r < dims.d; ++r)
    for (int c = 0; c < dims.d; ++c) p.trunk.w2(r, c) = uniform_sym(rng, a2);

  const double ap = std::sqrt(6.0 / (dims.d + dims.f));
  for (int r = 0; r < dims.d; ++r)
    for (int c = 0; c < dims.f; ++c) p.point_head.w(r, c) = uniform_sym(rng, ap);

  const double ai = std::sqrt(6.0 / (dims.e + dims.f));
  for (int r = 0; r < dims.e; ++r)
    for (int c = 0; c < dims.f; ++c) p.image_head.w(r, c) = uniform_sym(rng, ai);

  return p;
}

HeadParams HeadParams::zeros(const ModelDims& dims) {
  HeadParams p;
  p.trunk.w1 = Eigen::MatrixXd::Zero(kDescriptorWidth, dims.d);
  p.trunk.b1 = Eigen::VectorXd::Zero(dims.d);
  p.trunk.w2 = Eigen::MatrixXd::Zero(dims.d, dims.d);
  p.trunk.b2 = Eigen::VectorXd::Zero(dims.d);
  p.point_head.w = Eigen::MatrixXd::Zero(dims.d, dims.f);
  p.point_head.b = Eigen::VectorXd::Zero(dims.f);
  p.image_head.w = Eigen::MatrixXd::Zero(dims.e, dims.f);
  p.image_head.b = Eigen::VectorXd::Zero(dims.f);
  return p;
}

void HeadParams::validate(const ModelDims& dims) const {
  auto check = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c,
                  const char* name) {
    if (m.rows() != r || m.cols() != c || !m.allFinite())
      fail(std::string("bad parameter tensor: ") + name);
  };
  check(trunk.w1, kDescriptorWidth, dims.d, "trunk.w1");
  check(trunk.w2, dims.d, dims.d, "trunk.w2");
  check(point_head.w, dims.d, dims.f, "point_head.w");
  check(image_head.w, dims.e, dims.f, "image_head.w");
  if (trunk.b1.size() != dims.d || trunk.b2.size() != dims.d ||
      point_head.b.size() != dims.f || image_head.b.size() != dims.f)
    fail("bad parameter bias shape");
  if (!trunk.b1.allFinite() || !trunk.b2.allFinite() ||
      !point_head.b.allFinite() || !image_head.b.allFinite())
    fail("non-finite bias");
}

TrunkForward trainable_point_net(const Eigen::MatrixXd& desc,
                                 const TrunkParams& params) {
  if (desc.cols() != params.w1.rows() || params.w1.cols() != params.b1.size() ||
      params.w2.rows() != params.w1.cols() || params.w2.cols() != params.b2.size())
    fail("shape mismatch");
  TrunkForward fwd;
  fwd.hidden = ((desc * params.w1).rowwise() + params.b1.transpose()).array().tanh();
  fwd.features = (fwd.hidden * params.w2).rowwise() + params.b2.transpose();
  return fwd;
}

PointHeadForward point_head(const Eigen::MatrixXd& point_features,
                            const LinearHeadParams& params) {
  if (point_features.cols() != params.w.rows() || params.w.cols() != params.b.size())
    fail("shape mismatch");
  PointHeadForward fwd;
  fwd.pre = (point_features * params.w).rowwise() + params.b.transpose();
  fwd.norms = fwd.pre.rowwise().norm();
  if ((fwd.norms.array() < 1e-12).any()) fail("degenerate embedding");
  fwd.out = fwd.pre.array().colwise() / fwd.norms.array();
  return fwd;
}

FeatureGrid bilinear_upsample(const FeatureGrid& grid, int factor) {
  if (factor < 1) fail("upsample factor must be a positive integer");
  if (factor == 1) return grid;
  const int ow = grid.width * factor;
  const int oh = grid.height * factor;
  FeatureGrid out = FeatureGrid::zeros(ow, oh, grid.channels);
  const double scale = 1.0 / factor;
  for (int y = 0; y < oh; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, grid.height - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, grid.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < ow; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, grid.width - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, grid.width - 1);
      const double fx = sx - x0;
      const double* v00 = grid.at(x0, y0);
      const double* v10 = grid.at(x1, y0);
      const double* v01 = grid.at(x0, y1);
      const double* v11 = grid.at(x1, y1);
      double* dst = out.at(x, y);
      for (int c = 0; c < grid.channels; ++c)
        dst[c] = (1 - fy) * ((1 - fx) * v00[c] + fx * v10[c]) +
                 fy * ((1 - fx) * v01[c] + fx * v11[c]);
    }
  }
  return out;
}

ImageHeadForward image_head(const FeatureGrid& fm, const LinearHeadParams& params,
                            int factor) {
  if (fm.channels != params.w.rows() || params.w.cols() != params.b.size())
    fail("shape mismatch");
  const int f = static_cast<int>(params.w.cols());

  FeatureGrid conv = FeatureGrid::zeros(fm.width, fm.height, f);
  for (int y = 0; y < fm.height; ++y)
    for (int x = 0; x < fm.width; ++x) {
      const Eigen::Map<const Eigen::VectorXd> in(fm.at(x, y), fm.channels);
      Eigen::Map<Eigen::VectorXd> outv(conv.at(x, y), f);
      outv = params.w.transpose() * in + params.b;
    }

  ImageHeadForward fwd;
  fwd.pre = bilinear_upsample(conv, factor);
  fwd.out = FeatureGrid::zeros(fwd.pre.width, fwd.pre.height, f);
  fwd.norms.resize(static_cast<std::size_t>(fwd.pre.width) * fwd.pre.height);
  for (int y = 0; y < fwd.pre.height; ++y)
    for (int x = 0; x < fwd.pre.width; ++x) {
      const double* src = fwd.pre.at(x, y);
      double n2 = 0.0;
      for (int c = 0; c < f; ++c) n2 += src[c] * src[c];
      const double norm = std::sqrt(n2);
      if (norm < 1e-12) fail("degenerate embedding");
      fwd.norms[static_cast<std::size_t>(y) * fwd.pre.width + x] = norm;
      double* dst = fwd.out.at(x, y);
      for (int c = 0; c < f; ++c) dst[c] = src[c] / norm;
    }
  return fwd;
}

namespace {

struct TensorView {
  const char* name;
  const Eigen::MatrixXd* mat;
  const Eigen::VectorXd* vec;
};

std::vector<TensorView> tensor_views(const HeadParams& p) {
  return {{"trunk.w1", &p.trunk.w1, nullptr},   {"trunk.b1", nullptr, &p.trunk.b1},
          {"trunk.w2", &p.trunk.w2, nullptr},   {"trunk.b2", nullptr, &p.trunk.b2},
          {"point_head.w", &p.point_head.w, nullptr},
          {"point_head.b", nullptr, &p.point_head.b},
          {"image_head.w", &p.image_head.w, nullptr},
          {"image_head.b", nullptr, &p.image_head.b}};
}

}  // namespace

void save_params(const std::string& blob_path, const std::string& sidecar_path,
                 const HeadParams& params, const ModelDims& dims) {
  params.validate(dims);
  std::vector<double> blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const TensorView& t : tensor_views(params)) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["offset"] = blob.size();
    if (t.mat) {
      jt["rows"] = t.mat->rows();
      jt["cols"] = t.mat->cols();
      for (Eigen::Index r = 0; r < t.mat->rows(); ++r)
        for (Eigen::Index c = 0; c < t.mat->cols(); ++c) blob.push_back((*t.mat)(r, c));
    } else {
      jt["rows"] = t.vec->size();
      jt["cols"] = 1;
      for (Eigen::Index r = 0; r < t.vec->size(); ++r) blob.push_back((*t.vec)(r));
    }
    tensors.push_back(jt);
  }

  std::ofstream bf(blob_path, std::ios::binary);
  if (!bf) fail("cannot open for writing: " + blob_path);
  bf.write(reinterpret_cast<const char*>(blob.data()),
           static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!bf) fail("write failed: " + blob_path);

  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(blob.data(), blob.size() * sizeof(double))));

  nlohmann::json doc;
  doc["dims"] = {{"d", dims.d}, {"e", dims.e}, {"f", dims.f}, {"k", kDescriptorWidth}};
  doc["tensors"] = tensors;
  doc["checksum"] = checksum;
  std::ofstream sf(sidecar_path);
  if (!sf) fail("cannot open for writing: " + sidecar_path);
  sf << doc.dump(2) << "\n";
}

HeadParams load_params(const std::string& blob_path,
                       const std::string& sidecar_path, ModelDims& dims) {
  std::ifstream sf(sidecar_path);
  if (!sf) fail("cannot open: " + sidecar_path);
  nlohmann::json doc;
  try {
    sf >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("bad checkpoint sidecar: " + std::string(e.what()));
  }
  dims.d = doc.at("dims").at("d").get<int>();
  dims.e = doc.at("dims").at("e").get<int>();
  dims.f = doc.at("dims").at("f").get<int>();
  dims.validate();

  std::ifstream bf(blob_path, std::ios::binary);
  if (!bf) fail("cannot open: " + blob_path);
  std::vector<double> blob;
  {
    bf.seekg(0, std::ios::end);
    const auto bytes = bf.tellg();
    bf.seekg(0, std::ios::beg);
    if (bytes % sizeof(double) != 0) fail("bad checkpoint blob size");
    blob.resize(static_cast<std::size_t>(bytes) / sizeof(double));
    bf.read(reinterpret_cast<char*>(blob.data()), bytes);
    if (!bf) fail("truncated checkpoint blob");
  }

  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(blob.data(), blob.size() * sizeof(double))));
  if (doc.at("checksum").get<std::string>() != checksum)
    fail("checkpoint checksum mismatch");

  HeadParams params = HeadParams::zeros(dims);
  auto views = tensor_views(params);
  for (const auto& jt : doc.at("tensors")) {
    const std::string name = jt.at("name").get<std::string>();
    const std::size_t offset = jt.at("offset").get<std::size_t>();
    const Eigen::Index rows = jt.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = jt.at("cols").get<Eigen::Index>();
    auto it = std::find_if(views.begin(), views.end(),
                           [&](const TensorView& t) { return name == t.name; });
    if (it == views.end()) fail("unknown tensor in sidecar: " + name);
    std::size_t pos = offset;
    if (it->mat) {
      auto* m = const_cast<Eigen::MatrixXd*>(it->mat);
      if (m->rows() != rows || m->cols() != cols) fail("tensor shape mismatch: " + name);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (pos >= blob.size()) fail("checkpoint blob too small");
          (*m)(r, c) = blob[pos++];
        }
    } else {
      auto* v = const_cast<Eigen::VectorXd*>(it->vec);
      if (v->size() != rows || cols != 1) fail("tensor shape mismatch: " + name);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (pos >= blob.size()) fail("checkpoint blob too small");
        (*v)(r) = blob[pos++];
      }
    }
  }
  params.validate(dims);
  return params;
}

}  // namespace slidr
