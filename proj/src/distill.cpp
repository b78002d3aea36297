#include "slidr/distill.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace slidr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// seed-stream tags
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kSampleStream = 4;
constexpr std::uint64_t kFixtureStream = 7;

void check_unit_rows(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (std::abs(m.row(i).norm() - 1.0) > 1e-6)
      fail(std::string(what) + " rows must be unit norm");
}

std::vector<std::vector<std::int64_t>> pixels_by_label(const SuperpixelPartition& part) {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(part.num_segments));
  for (std::size_t p = 0; p < part.labels.size(); ++p)
    out[static_cast<std::size_t>(part.labels[p])].push_back(static_cast<std::int64_t>(p));
  return out;
}

FeatureGrid bilinear_upsample_transpose(const FeatureGrid& grad_out, int factor,
                                        int src_w, int src_h) {
  FeatureGrid grad_in = FeatureGrid::zeros(src_w, src_h, grad_out.channels);
  if (factor == 1) {
    grad_in.data = grad_out.data;
    return grad_in;
  }
  const double scale = 1.0 / factor;
  for (int y = 0; y < grad_out.height; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, src_h - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < grad_out.width; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, src_w - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double fx = sx - x0;
      const double* g = grad_out.at(x, y);
      double* d00 = grad_in.at(x0, y0);
      double* d10 = grad_in.at(x1, y0);
      double* d01 = grad_in.at(x0, y1);
      double* d11 = grad_in.at(x1, y1);
      for (int c = 0; c < grad_out.channels; ++c) {
        d00[c] += (1 - fy) * (1 - fx) * g[c];
        d10[c] += (1 - fy) * fx * g[c];
        d01[c] += fy * (1 - fx) * g[c];
        d11[c] += fy * fx * g[c];
      }
    }
  }
  return grad_in;
}

void add_grads(HeadParams& acc, const HeadParams& delta) {
  acc.trunk.w1 += delta.trunk.w1;
  acc.trunk.b1 += delta.trunk.b1;
  acc.trunk.w2 += delta.trunk.w2;
  acc.trunk.b2 += delta.trunk.b2;
  acc.point_head.w += delta.point_head.w;
  acc.point_head.b += delta.point_head.b;
  acc.image_head.w += delta.image_head.w;
  acc.image_head.b += delta.image_head.b;
}

// one scene's chain from pooled-feature gradients down to parameter grads
HeadParams scene_backward(const SceneData& data, const SceneArtifacts& art,
                          const Eigen::MatrixXd& grad_points,
                          const std::vector<FeatureGrid>& grad_pixels,
                          const HeadParams& params, const ModelDims& dims,
                          int factor) {
  HeadParams grads = HeadParams::zeros(dims);

  // point path: l2 normalization Jacobian, linear head, trunk tanh layers
  const Eigen::MatrixXd& u = art.phead.out;
  Eigen::MatrixXd grad_pre(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double dot = grad_points.row(i).dot(u.row(i));
    grad_pre.row(i) = (grad_points.row(i) - dot * u.row(i)) / art.phead.norms(i);
  }
  grads.point_head.w.noalias() = art.trunk.features.transpose() * grad_pre;
  grads.point_head.b = grad_pre.colwise().sum().transpose();

  Eigen::MatrixXd grad_feat;
  grad_feat.noalias() = grad_pre * params.point_head.w.transpose();
  grads.trunk.w2.noalias() = art.trunk.hidden.transpose() * grad_feat;
  grads.trunk.b2 = grad_feat.colwise().sum().transpose();

  Eigen::MatrixXd grad_hidden;
  grad_hidden.noalias() = grad_feat * params.trunk.w2.transpose();
  const Eigen::MatrixXd grad_a1 =
      grad_hidden.array() * (1.0 - art.trunk.hidden.array().square());
  grads.trunk.w1.noalias() = data.descriptors.transpose() * grad_a1;
  grads.trunk.b1 = grad_a1.colwise().sum().transpose();

  // image path per camera: normalization Jacobian, upsampling transpose,
  // 1x1 conv transpose; the frozen feature map gets no gradient
  for (std::size_t c = 0; c < grad_pixels.size(); ++c) {
    const ImageHeadForward& ih = art.iheads[c];
    const FeatureGrid& gp = grad_pixels[c];
    FeatureGrid grad_upsampled =
        FeatureGrid::zeros(ih.pre.width, ih.pre.height, ih.pre.channels);
    const int npix = ih.pre.width * ih.pre.height;
    for (int p = 0; p < npix; ++p) {
      const double* ge = gp.data.data() + static_cast<std::size_t>(p) * gp.channels;
      const double* e = ih.out.data.data() + static_cast<std::size_t>(p) * gp.channels;
      double* gu = grad_upsampled.data.data() + static_cast<std::size_t>(p) * gp.channels;
      double dot = 0.0;
      for (int ch = 0; ch < gp.channels; ++ch) dot += ge[ch] * e[ch];
      const double inv_norm = 1.0 / ih.norms[static_cast<std::size_t>(p)];
      for (int ch = 0; ch < gp.channels; ++ch)
        gu[ch] = (ge[ch] - dot * e[ch]) * inv_norm;
    }
    const FeatureGrid& fm = data.feature_maps[c];
    const FeatureGrid grad_conv =
        bilinear_upsample_transpose(grad_upsampled, factor, fm.width, fm.height);
    for (int y = 0; y < fm.height; ++y)
      for (int x = 0; x < fm.width; ++x) {
        const Eigen::Map<const Eigen::VectorXd> in(fm.at(x, y), fm.channels);
        const Eigen::Map<const Eigen::VectorXd> gout(grad_conv.at(x, y),
                                                     grad_conv.channels);
        grads.image_head.w.noalias() += in * gout.transpose();
        grads.image_head.b += gout;
      }
  }
  return grads;
}

}  // namespace

void LossConfig::validate() const {
  if (!(temperature > 0.0)) fail("loss.temperature must be positive");
  if (pixel_sample_size < 1) fail("loss.pixel_sample_size must be at least 1");
}

void OptimizerConfig::validate() const {
  if (!(lr0 > 0.0)) fail("optimizer.lr0 must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("optimizer.momentum must be in [0,1)");
  if (weight_decay < 0.0) fail("optimizer.weight_decay must be non-negative");
  if (dampening < 0.0 || dampening > 1.0) fail("optimizer.dampening must be in [0,1]");
  if (epochs < 0) fail("optimizer.epochs must be non-negative");
  if (batch_size < 1) fail("optimizer.batch_size must be at least 1");
}

std::vector<PooledVector> pool_superpoint(const Eigen::MatrixXd& point_embeddings,
                                          const SuperpointGroups& groups) {
  std::vector<PooledVector> out;
  for (std::size_t c = 0; c < groups.cameras.size(); ++c) {
    for (const auto& [s, members] : groups.cameras[c]) {
      if (members.empty()) fail("empty superpoint group");
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(point_embeddings.cols());
      for (std::int64_t i : members) {
        if (i < 0 || i >= point_embeddings.rows()) fail("group member out of range");
        sum += point_embeddings.row(i).transpose();
      }
      out.push_back({static_cast<int>(c), s, sum / static_cast<double>(members.size())});
    }
  }
  return out;
}

std::vector<PooledVector> pool_superpixel(const FeatureGrid& pixel_embeddings,
                                          const SuperpixelPartition& part,
                                          const std::vector<std::int32_t>& keep,
                                          int camera) {
  if (pixel_embeddings.width != part.width || pixel_embeddings.height != part.height)
    fail("embedding grid does not match partition");
  for (std::int32_t s : keep)
    if (s < 0 || s >= part.num_segments) fail("keep contains unknown id");

  std::vector<PooledVector> out;
  const auto by_label = pixels_by_label(part);
  for (std::int32_t s : keep) {
    const auto& pixels = by_label[static_cast<std::size_t>(s)];
    if (pixels.empty()) fail("keep contains an empty superpixel");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(pixel_embeddings.channels);
    for (std::int64_t p : pixels)
      sum += Eigen::Map<const Eigen::VectorXd>(
          pixel_embeddings.data.data() +
              static_cast<std::size_t>(p) * pixel_embeddings.channels,
          pixel_embeddings.channels);
    out.push_back({camera, s, sum / static_cast<double>(pixels.size())});
  }
  return out;
}

double contrastive_loss(const PooledPairs& pairs, const LossConfig& cfg) {
  cfg.validate();
  const Eigen::Index k = pairs.count();
  if (k < 1) fail("contrastive loss needs at least one pair");
  if (pairs.g.rows() != k || pairs.f.cols() != pairs.g.cols())
    fail("pair matrices disagree");
  check_unit_rows(pairs.f, "pooled point features");
  check_unit_rows(pairs.g, "pooled image features");

  const double inv_tau = 1.0 / cfg.temperature;
  double loss = 0.0;
  Eigen::VectorXd sims(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    sims.noalias() = pairs.g * pairs.f.row(a).transpose();
    sims *= inv_tau;
    const double m = sims.maxCoeff();
    const double lse = m + std::log((sims.array() - m).exp().sum());
    loss += lse - sims(a);
  }
  return loss;
}

PairGrads contrastive_loss_backward(const PooledPairs& pairs, const LossConfig& cfg) {
  cfg.validate();
  const Eigen::Index k = pairs.count();
  if (k < 1) fail("contrastive loss needs at least one pair");
  check_unit_rows(pairs.f, "pooled point features");
  check_unit_rows(pairs.g, "pooled image features");

  const double inv_tau = 1.0 / cfg.temperature;
  PairGrads out;
  out.df = Eigen::MatrixXd::Zero(k, pairs.f.cols());
  out.dg = Eigen::MatrixXd::Zero(k, pairs.g.cols());

  Eigen::VectorXd sims(k), coeff(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    sims.noalias() = pairs.g * pairs.f.row(a).transpose();
    sims *= inv_tau;
    const double m = sims.maxCoeff();
    const double lse = m + std::log((sims.array() - m).exp().sum());
    out.loss += lse - sims(a);
    coeff = (sims.array() - lse).exp();
    coeff(a) -= 1.0;
    coeff *= inv_tau;
    out.df.row(a).noalias() = coeff.transpose() * pairs.g;
    out.dg.noalias() += coeff * pairs.f.row(a);
  }
  return out;
}

double pixel_mode_loss(const Eigen::MatrixXd& point_embeddings,
                       const std::vector<FeatureGrid>& pixel_embeddings,
                       const PairList& pairs, const LossConfig& cfg, Rng& rng) {
  if (pairs.empty()) fail("pixel-mode loss needs at least one pair");

  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take =
      std::min(idx.size(), static_cast<std::size_t>(cfg.pixel_sample_size));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());

  PooledPairs pooled;
  const Eigen::Index fdim = point_embeddings.cols();
  pooled.f.resize(static_cast<Eigen::Index>(take), fdim);
  pooled.g.resize(static_cast<Eigen::Index>(take), fdim);
  pooled.provenance.resize(take);
  for (std::size_t k = 0; k < take; ++k) {
    const Pair& p = pairs[idx[k]];
    if (p.point < 0 || p.point >= point_embeddings.rows())
      fail("pair point out of range");
    if (p.camera < 0 || static_cast<std::size_t>(p.camera) >= pixel_embeddings.size())
      fail("pair camera out of range");
    const FeatureGrid& grid = pixel_embeddings[static_cast<std::size_t>(p.camera)];
    if (grid.channels != fdim) fail("embedding widths disagree");
    const std::int64_t flat = static_cast<std::int64_t>(p.pixel) - 1;
    if (flat < 0 || flat >= static_cast<std::int64_t>(grid.width) * grid.height)
      fail("pair pixel out of range");
    pooled.f.row(static_cast<Eigen::Index>(k)) = point_embeddings.row(p.point);
    pooled.g.row(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(
            grid.data.data() + static_cast<std::size_t>(flat) * grid.channels,
            grid.channels)
            .transpose();
    pooled.provenance[k] = {0, p.camera, static_cast<std::int64_t>(k)};
  }
  return contrastive_loss(pooled, cfg);
}

double cosine_lr(int t, int total, double lr0) {
  if (total < 1) fail("schedule length must be at least 1");
  if (t < 0 || t > total) fail("epoch out of schedule range");
  return lr0 * (1.0 + std::cos(kPi * static_cast<double>(t) / total)) / 2.0;
}

void sgd_step(HeadParams& params, const HeadParams& grads, SgdState& state,
              const OptimizerConfig& cfg, double lr) {
  cfg.validate();
  HeadParams& vel = state.velocity;
  struct MatSlot {
    Eigen::MatrixXd* p;
    const Eigen::MatrixXd* g;
    Eigen::MatrixXd* v;
  };
  struct VecSlot {
    Eigen::VectorXd* p;
    const Eigen::VectorXd* g;
    Eigen::VectorXd* v;
  };
  const MatSlot mats[] = {
      {&params.trunk.w1, &grads.trunk.w1, &vel.trunk.w1},
      {&params.trunk.w2, &grads.trunk.w2, &vel.trunk.w2},
      {&params.point_head.w, &grads.point_head.w, &vel.point_head.w},
      {&params.image_head.w, &grads.image_head.w, &vel.image_head.w},
  };
  const VecSlot vecs[] = {
      {&params.trunk.b1, &grads.trunk.b1, &vel.trunk.b1},
      {&params.trunk.b2, &grads.trunk.b2, &vel.trunk.b2},
      {&params.point_head.b, &grads.point_head.b, &vel.point_head.b},
      {&params.image_head.b, &grads.image_head.b, &vel.image_head.b},
  };
  for (const MatSlot& s : mats)
    if (!s.g->allFinite()) fail("divergence");
  for (const VecSlot& s : vecs)
    if (!s.g->allFinite()) fail("divergence");

  for (const MatSlot& s : mats) {
    const Eigen::MatrixXd adjusted = *s.g + cfg.weight_decay * *s.p;
    if (state.initialized)
      *s.v = cfg.momentum * *s.v + (1.0 - cfg.dampening) * adjusted;
    else
      *s.v = adjusted;
    *s.p -= lr * *s.v;
  }
  for (const VecSlot& s : vecs) {
    const Eigen::VectorXd adjusted = *s.g + cfg.weight_decay * *s.p;
    if (state.initialized)
      *s.v = cfg.momentum * *s.v + (1.0 - cfg.dampening) * adjusted;
    else
      *s.v = adjusted;
    *s.p -= lr * *s.v;
  }
  state.initialized = true;
}

SceneArtifacts forward_scene(const SceneData& data, const HeadParams& params,
                             int upsample_factor) {
  SceneArtifacts fwd;
  fwd.trunk = trainable_point_net(data.descriptors, params.trunk);
  fwd.phead = point_head(fwd.trunk.features, params.point_head);
  fwd.iheads.reserve(data.feature_maps.size());
  for (const FeatureGrid& fm : data.feature_maps)
    fwd.iheads.push_back(image_head(fm, params.image_head, upsample_factor));
  return fwd;
}

BatchAssembly assemble_batch(const std::vector<SceneData>& data,
                             const std::vector<SceneArtifacts>& fwd,
                             LossConfig::Mode mode) {
  if (data.size() != fwd.size()) fail("scene data and forwards disagree");

  std::vector<Eigen::VectorXd> raw_f, raw_g;
  BatchAssembly batch;

  if (mode == LossConfig::Mode::superpixel) {
    for (std::size_t s = 0; s < data.size(); ++s) {
      std::vector<std::vector<std::vector<std::int64_t>>> label_pixels;
      label_pixels.reserve(data[s].partitions.size());
      for (const auto& part : data[s].partitions)
        label_pixels.push_back(pixels_by_label(part));

      for (std::size_t c = 0; c < data[s].groups.cameras.size(); ++c) {
        for (const auto& [sp, members] : data[s].groups.cameras[c]) {
          if (members.empty()) fail("empty superpoint group");
          BatchAssembly::Member m;
          m.scene = static_cast<int>(s);
          m.camera = static_cast<int>(c);
          m.tag = sp;
          m.points = members;
          m.pixels = label_pixels[c][static_cast<std::size_t>(sp)];
          if (m.pixels.empty()) fail("superpixel id missing from partition");

          const Eigen::MatrixXd& u = fwd[s].phead.out;
          Eigen::VectorXd fsum = Eigen::VectorXd::Zero(u.cols());
          for (std::int64_t i : m.points) fsum += u.row(i).transpose();
          raw_f.push_back(fsum / static_cast<double>(m.points.size()));

          const FeatureGrid& e = fwd[s].iheads[c].out;
          Eigen::VectorXd gsum = Eigen::VectorXd::Zero(e.channels);
          for (std::int64_t p : m.pixels)
            gsum += Eigen::Map<const Eigen::VectorXd>(
                e.data.data() + static_cast<std::size_t>(p) * e.channels, e.channels);
          raw_g.push_back(gsum / static_cast<double>(m.pixels.size()));

          batch.members.push_back(std::move(m));
        }
      }
    }
  } else {
    std::int64_t ordinal = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (const Pair& p : data[s].sampled_pairs) {
        BatchAssembly::Member m;
        m.scene = static_cast<int>(s);
        m.camera = p.camera;
        m.tag = ordinal++;
        m.points = {p.point};
        const FeatureGrid& e = fwd[s].iheads[static_cast<std::size_t>(p.camera)].out;
        const std::int64_t flat = static_cast<std::int64_t>(p.pixel) - 1;
        if (flat < 0 || flat >= static_cast<std::int64_t>(e.width) * e.height)
          fail("pair pixel out of range");
        m.pixels = {flat};
        raw_f.push_back(fwd[s].phead.out.row(p.point).transpose());
        raw_g.push_back(Eigen::Map<const Eigen::VectorXd>(
            e.data.data() + static_cast<std::size_t>(flat) * e.channels, e.channels));
        batch.members.push_back(std::move(m));
      }
    }
  }

  const Eigen::Index k = static_cast<Eigen::Index>(raw_f.size());
  if (k == 0) fail("batch produced no pairs");
  const Eigen::Index fdim = raw_f.front().size();
  batch.raw_f.resize(k, fdim);
  batch.raw_g.resize(k, fdim);
  batch.pairs.f.resize(k, fdim);
  batch.pairs.g.resize(k, fdim);
  batch.pairs.provenance.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    batch.raw_f.row(i) = raw_f[static_cast<std::size_t>(i)].transpose();
    batch.raw_g.row(i) = raw_g[static_cast<std::size_t>(i)].transpose();
    const double nf = batch.raw_f.row(i).norm();
    const double ng = batch.raw_g.row(i).norm();
    if (nf < 1e-12 || ng < 1e-12) fail("degenerate embedding");
    batch.pairs.f.row(i) = batch.raw_f.row(i) / nf;
    batch.pairs.g.row(i) = batch.raw_g.row(i) / ng;
    const auto& m = batch.members[static_cast<std::size_t>(i)];
    batch.pairs.provenance[static_cast<std::size_t>(i)] = {m.scene, m.camera, m.tag};
  }
  return batch;
}

BatchBackwardResult batch_backward(const std::vector<SceneData>& data,
                                   const std::vector<SceneArtifacts>& fwd,
                                   const BatchAssembly& batch,
                                   const HeadParams& params, const LossConfig& cfg,
                                   const ModelDims& dims, int threads) {
  const PairGrads lg = contrastive_loss_backward(batch.pairs, cfg);
  const Eigen::Index k = batch.pairs.count();
  const Eigen::Index fdim = batch.pairs.f.cols();

  std::vector<Eigen::MatrixXd> grad_points(data.size());
  std::vector<std::vector<FeatureGrid>> grad_pixels(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    grad_points[s] = Eigen::MatrixXd::Zero(fwd[s].phead.out.rows(), fdim);
    grad_pixels[s].reserve(fwd[s].iheads.size());
    for (const auto& ih : fwd[s].iheads)
      grad_pixels[s].push_back(
          FeatureGrid::zeros(ih.out.width, ih.out.height, ih.out.channels));
  }

  // loss grads -> assembly normalization -> pooling means
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& m = batch.members[static_cast<std::size_t>(i)];
    const double nf = batch.raw_f.row(i).norm();
    const double ng = batch.raw_g.row(i).norm();
    const Eigen::RowVectorXd fhat = batch.pairs.f.row(i);
    const Eigen::RowVectorXd ghat = batch.pairs.g.row(i);
    const Eigen::RowVectorXd draw_f =
        (lg.df.row(i) - lg.df.row(i).dot(fhat) * fhat) / nf;
    const Eigen::RowVectorXd draw_g =
        (lg.dg.row(i) - lg.dg.row(i).dot(ghat) * ghat) / ng;

    const Eigen::RowVectorXd per_point = draw_f / static_cast<double>(m.points.size());
    for (std::int64_t pi : m.points)
      grad_points[static_cast<std::size_t>(m.scene)].row(pi) += per_point;

    const Eigen::RowVectorXd per_pixel = draw_g / static_cast<double>(m.pixels.size());
    FeatureGrid& gp =
        grad_pixels[static_cast<std::size_t>(m.scene)][static_cast<std::size_t>(m.camera)];
    for (std::int64_t px : m.pixels) {
      double* dst = gp.data.data() + static_cast<std::size_t>(px) * gp.channels;
      for (Eigen::Index c = 0; c < fdim; ++c) dst[c] += per_pixel(c);
    }
  }

  const int factor = 4;  // resolution contract

  BatchBackwardResult result;
  result.loss = lg.loss;
  result.grads = HeadParams::zeros(dims);

  if (threads > 1 && data.size() > 1) {
    std::vector<std::future<HeadParams>> futures;
    futures.reserve(data.size());
    for (std::size_t s = 0; s < data.size(); ++s)
      futures.push_back(std::async(std::launch::async, [&, s] {
        return scene_backward(data[s], fwd[s], grad_points[s], grad_pixels[s],
                              params, dims, factor);
      }));
    for (auto& fu : futures) add_grads(result.grads, fu.get());
  } else {
    for (std::size_t s = 0; s < data.size(); ++s)
      add_grads(result.grads, scene_backward(data[s], fwd[s], grad_points[s],
                                             grad_pixels[s], params, dims, factor));
  }
  return result;
}

namespace {

// per-scene training preparation: augmentations, grouping, descriptors and
// frozen image features
SceneData prepare_scene(const TrainScene& scene, const ModelDims& dims,
                        const AugmentConfig& aug, const CylVoxelSpec& voxel,
                        Rng& rng, PairList* surviving_pairs) {
  const PointAugmentResult pa = augment_point_cloud(scene.cloud, scene.pairs, aug, rng);

  SceneData data;
  data.feature_maps.resize(scene.images.size());
  data.partitions.resize(scene.images.size());

  PairList all_pairs;
  for (std::size_t c = 0; c < scene.images.size(); ++c) {
    PairList cam_pairs;
    for (const Pair& p : pa.pairs)
      if (p.camera == static_cast<int>(c)) cam_pairs.push_back(p);
    ImageAugmentResult ia =
        augment_image(scene.images[c], scene.partitions[c], cam_pairs, aug, rng);
    data.feature_maps[c] = toy_image_backbone(ia.image, dims.e);
    data.partitions[c] = std::move(ia.partition);
    all_pairs.insert(all_pairs.end(), ia.pairs.begin(), ia.pairs.end());
  }

  const CylVoxelization vox = cylindrical_voxelize(pa.cloud, voxel);
  data.descriptors = point_descriptor(pa.cloud, vox);
  data.groups = group_pairs(all_pairs, data.partitions);
  if (surviving_pairs) *surviving_pairs = std::move(all_pairs);
  return data;
}

}  // namespace

PretrainResult pretrain(const std::vector<TrainScene>& scenes,
                        const ModelDims& dims, const AugmentConfig& aug,
                        const LossConfig& loss, const OptimizerConfig& opt,
                        const CylVoxelSpec& voxel, std::uint64_t seed,
                        int threads) {
  dims.validate();
  aug.validate();
  loss.validate();
  opt.validate();
  voxel.validate();
  if (scenes.empty()) fail("pretrain needs at least one scene");
  for (const TrainScene& s : scenes) {
    if (s.pairs.empty()) fail("scene yields no pairs");
    if (s.images.size() != s.partitions.size())
      fail("scene images and partitions disagree");
  }

  PretrainResult result;
  result.params = HeadParams::init(dims, derive_seed(seed, kInitStream));
  SgdState state;
  state.velocity = HeadParams::zeros(dims);

  const int num_scenes = static_cast<int>(scenes.size());
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, opt.epochs, opt.lr0);

    std::vector<int> order(static_cast<std::size_t>(num_scenes));
    std::iota(order.begin(), order.end(), 0);
    {
      Rng shuffle_rng(derive_seed(seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
      for (int i = num_scenes - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng.index(static_cast<std::size_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
    }

    double epoch_loss = 0.0;
    std::int64_t epoch_anchors = 0;
    int batch_index = 0;
    for (int start = 0; start < num_scenes; start += opt.batch_size, ++batch_index) {
      const int end = std::min(start + opt.batch_size, num_scenes);
      const int batch_n = end - start;

      std::vector<SceneData> data(static_cast<std::size_t>(batch_n));
      std::vector<PairList> survivors(static_cast<std::size_t>(batch_n));
      auto prepare_one = [&](int pos) {
        const int scene_idx = order[static_cast<std::size_t>(start + pos)];
        Rng rng(derive_seed(seed, kAugmentStream, static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(scene_idx)));
        data[static_cast<std::size_t>(pos)] =
            prepare_scene(scenes[static_cast<std::size_t>(scene_idx)], dims, aug,
                          voxel, rng, &survivors[static_cast<std::size_t>(pos)]);
      };
      if (threads > 1 && batch_n > 1) {
        std::vector<std::future<void>> futures;
        for (int pos = 0; pos < batch_n; ++pos)
          futures.push_back(std::async(std::launch::async, prepare_one, pos));
        for (auto& fu : futures) fu.get();
      } else {
        for (int pos = 0; pos < batch_n; ++pos) prepare_one(pos);
      }

      if (loss.mode == LossConfig::Mode::pixel) {
        // batch-wide uniform subsample without replacement
        std::vector<std::pair<int, Pair>> tagged;
        for (int pos = 0; pos < batch_n; ++pos)
          for (const Pair& p : survivors[static_cast<std::size_t>(pos)])
            tagged.emplace_back(pos, p);
        Rng sample_rng(derive_seed(seed, kSampleStream,
                                   static_cast<std::uint64_t>(epoch),
                                   static_cast<std::uint64_t>(batch_index)));
        const std::size_t take =
            std::min(tagged.size(), static_cast<std::size_t>(loss.pixel_sample_size));
        std::vector<std::size_t> idx(tagged.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < take; ++i) {
          const std::size_t j = i + sample_rng.index(idx.size() - i);
          std::swap(idx[i], idx[j]);
        }
        idx.resize(take);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx)
          data[static_cast<std::size_t>(tagged[i].first)].sampled_pairs.push_back(
              tagged[i].second);
      }

      std::vector<SceneArtifacts> fwd(static_cast<std::size_t>(batch_n));
      auto forward_one = [&](int pos) {
        fwd[static_cast<std::size_t>(pos)] =
            forward_scene(data[static_cast<std::size_t>(pos)], result.params);
      };
      if (threads > 1 && batch_n > 1) {
        std::vector<std::future<void>> futures;
        for (int pos = 0; pos < batch_n; ++pos)
          futures.push_back(std::async(std::launch::async, forward_one, pos));
        for (auto& fu : futures) fu.get();
      } else {
        for (int pos = 0; pos < batch_n; ++pos) forward_one(pos);
      }

      const BatchAssembly batch = assemble_batch(data, fwd, loss.mode);
      const BatchBackwardResult bw =
          batch_backward(data, fwd, batch, result.params, loss, dims, threads);
      if (!std::isfinite(bw.loss)) fail("divergence");
      sgd_step(result.params, bw.grads, state, opt, lr);

      epoch_loss += bw.loss;
      epoch_anchors += batch.pairs.count();
    }

    result.history.push_back(
        {lr, epoch_loss / static_cast<double>(epoch_anchors), epoch_anchors});
  }
  return result;
}

GradCheckReport gradient_check(std::uint64_t seed, double tolerance,
                               LossConfig::Mode mode) {
  ModelDims dims;
  dims.d = 5;
  dims.e = 7;
  dims.f = 4;
  const int num_scenes = 2;
  const int num_cameras = 2;
  const int fm_w = 2, fm_h = 2;  // upsampled to 8x8
  const int img_w = fm_w * 4, img_h = fm_h * 4;
  const int points = 12;

  Rng rng(derive_seed(seed, kFixtureStream));
  std::vector<SceneData> data(num_scenes);
  for (int s = 0; s < num_scenes; ++s) {
    SceneData& sd = data[static_cast<std::size_t>(s)];
    sd.descriptors.resize(points, kDescriptorWidth);
    for (Eigen::Index i = 0; i < sd.descriptors.rows(); ++i)
      for (Eigen::Index j = 0; j < sd.descriptors.cols(); ++j)
        sd.descriptors(i, j) = rng.uniform(-2.0, 2.0);

    PairList pairs;
    for (int c = 0; c < num_cameras; ++c) {
      FeatureGrid fm = FeatureGrid::zeros(fm_w, fm_h, dims.e);
      for (double& v : fm.data) v = rng.uniform(-1.0, 1.0);
      sd.feature_maps.push_back(std::move(fm));

      SuperpixelPartition part;
      part.width = img_w;
      part.height = img_h;
      part.num_segments = 4;
      part.labels.resize(static_cast<std::size_t>(img_w) * img_h);
      for (int y = 0; y < img_h; ++y)
        for (int x = 0; x < img_w; ++x)
          part.labels[static_cast<std::size_t>(y * img_w + x)] =
              (y < img_h / 2 ? 0 : 2) + (x < img_w / 2 ? 0 : 1);
      sd.partitions.push_back(std::move(part));

      for (int i = 0; i < points; ++i) {
        if (!rng.bernoulli(0.8)) continue;
        const std::uint32_t pixel =
            static_cast<std::uint32_t>(rng.index(static_cast<std::size_t>(img_w) * img_h)) + 1;
        pairs.push_back({i, c, pixel});
      }
    }
    if (pairs.empty()) pairs.push_back({0, 0, 1});
    sd.groups = group_pairs(pairs, sd.partitions);
    sd.sampled_pairs = pairs;
  }

  HeadParams params = HeadParams::init(dims, derive_seed(seed, kFixtureStream, 1));
  LossConfig cfg;
  cfg.mode = mode;

  auto loss_value = [&](const HeadParams& p) {
    std::vector<SceneArtifacts> fwd;
    fwd.reserve(data.size());
    for (const SceneData& sd : data) fwd.push_back(forward_scene(sd, p));
    return contrastive_loss(assemble_batch(data, fwd, cfg.mode).pairs, cfg);
  };

  std::vector<SceneArtifacts> fwd;
  fwd.reserve(data.size());
  for (const SceneData& sd : data) fwd.push_back(forward_scene(sd, params));
  const BatchAssembly batch = assemble_batch(data, fwd, cfg.mode);
  const BatchBackwardResult bw = batch_backward(data, fwd, batch, params, cfg, dims);

  struct Entry {
    const char* name;
    Eigen::Map<Eigen::VectorXd> p;
    Eigen::Map<const Eigen::VectorXd> g;
  };
  auto flat = [](Eigen::MatrixXd& m) {
    return Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
  };
  auto flat_c = [](const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  };
  auto flat_v = [](Eigen::VectorXd& v) {
    return Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
  };
  auto flat_vc = [](const Eigen::VectorXd& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  };
  std::vector<Entry> entries;
  entries.push_back({"trunk.w1", flat(params.trunk.w1), flat_c(bw.grads.trunk.w1)});
  entries.push_back({"trunk.b1", flat_v(params.trunk.b1), flat_vc(bw.grads.trunk.b1)});
  entries.push_back({"trunk.w2", flat(params.trunk.w2), flat_c(bw.grads.trunk.w2)});
  entries.push_back({"trunk.b2", flat_v(params.trunk.b2), flat_vc(bw.grads.trunk.b2)});
  entries.push_back({"point_head.w", flat(params.point_head.w), flat_c(bw.grads.point_head.w)});
  entries.push_back({"point_head.b", flat_v(params.point_head.b), flat_vc(bw.grads.point_head.b)});
  entries.push_back({"image_head.w", flat(params.image_head.w), flat_c(bw.grads.image_head.w)});
  entries.push_back({"image_head.b", flat_v(params.image_head.b), flat_vc(bw.grads.image_head.b)});

  GradCheckReport report;
  report.passed = true;
  for (Entry& e : entries) {
    double tensor_max = 0.0;
    for (Eigen::Index i = 0; i < e.p.size(); ++i) {
      const double original = e.p(i);
      const double h = 1e-6 * std::max(1.0, std::abs(original));
      e.p(i) = original + h;
      const double up = loss_value(params);
      e.p(i) = original - h;
      const double down = loss_value(params);
      e.p(i) = original;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = e.g(i);
      const double rel = std::abs(analytic - fd) /
                         std::max({std::abs(analytic), std::abs(fd), 1e-6});
      tensor_max = std::max(tensor_max, rel);
    }
    report.per_tensor.emplace_back(e.name, tensor_max);
    report.max_rel_error = std::max(report.max_rel_error, tensor_max);
    if (tensor_max >= tolerance) report.passed = false;
  }
  return report;
}

}  // namespace slidr
