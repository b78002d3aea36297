#include "slidr/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace slidr {

namespace {

struct LabImage {
  int width = 0, height = 0;
  std::vector<double> lab;  // H*W*3
  const double* at(int x, int y) const {
    return lab.data() + static_cast<std::size_t>(y * width + x) * 3;
  }
};

LabImage to_lab(const Image& img) {
  LabImage out;
  out.width = img.width;
  out.height = img.height;
  out.lab.resize(img.rgb.size());
  for (int i = 0; i < img.pixel_count(); ++i) {
    const auto lab = rgb_to_lab(img.rgb[static_cast<std::size_t>(i) * 3 + 0],
                                img.rgb[static_cast<std::size_t>(i) * 3 + 1],
                                img.rgb[static_cast<std::size_t>(i) * 3 + 2]);
    out.lab[static_cast<std::size_t>(i) * 3 + 0] = lab[0];
    out.lab[static_cast<std::size_t>(i) * 3 + 1] = lab[1];
    out.lab[static_cast<std::size_t>(i) * 3 + 2] = lab[2];
  }
  return out;
}

double lab_gradient(const LabImage& im, int x, int y) {
  const int xm = std::max(x - 1, 0), xp = std::min(x + 1, im.width - 1);
  const int ym = std::max(y - 1, 0), yp = std::min(y + 1, im.height - 1);
  double g = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double dx = im.at(xp, y)[c] - im.at(xm, y)[c];
    const double dy = im.at(x, yp)[c] - im.at(x, ym)[c];
    g += dx * dx + dy * dy;
  }
  return g;
}

struct SlicCenter {
  double l = 0, a = 0, b = 0, x = 0, y = 0;
};

// Labels 4-connected components of equal `labels` values. Returns component
// id per pixel; fills per-component source label, size and seed pixel.
std::vector<std::int32_t> connected_components(
    const std::vector<std::int32_t>& labels, int w, int h,
    std::vector<std::int32_t>& comp_label, std::vector<std::int64_t>& comp_size) {
  std::vector<std::int32_t> comp(labels.size(), -1);
  comp_label.clear();
  comp_size.clear();
  std::deque<int> queue;
  for (int start = 0; start < w * h; ++start) {
    if (comp[static_cast<std::size_t>(start)] >= 0) continue;
    const std::int32_t id = static_cast<std::int32_t>(comp_label.size());
    comp_label.push_back(labels[static_cast<std::size_t>(start)]);
    comp_size.push_back(0);
    queue.push_back(start);
    comp[static_cast<std::size_t>(start)] = id;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      ++comp_size[static_cast<std::size_t>(id)];
      const int x = p % w, y = p / w;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& nb : nbr) {
        if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
        const int q = nb[1] * w + nb[0];
        if (comp[static_cast<std::size_t>(q)] < 0 &&
            labels[static_cast<std::size_t>(q)] == labels[static_cast<std::size_t>(p)]) {
          comp[static_cast<std::size_t>(q)] = id;
          queue.push_back(q);
        }
      }
    }
  }
  return comp;
}

// Merges every non-keeper component into the largest 4-adjacent superpixel
// (ties to the smallest label id), then relabels contiguously by ascending
// original label.
SuperpixelPartition enforce_connectivity(const std::vector<std::int32_t>& labels,
                                         int w, int h) {
  std::vector<std::int32_t> comp_label;
  std::vector<std::int64_t> comp_size;
  const std::vector<std::int32_t> comp =
      connected_components(labels, w, h, comp_label, comp_size);
  const int num_comp = static_cast<int>(comp_label.size());

  // keeper per label = its largest component (first found wins ties)
  const std::int32_t max_label =
      *std::max_element(comp_label.begin(), comp_label.end());
  std::vector<std::int32_t> keeper(static_cast<std::size_t>(max_label) + 1, -1);
  for (int c = 0; c < num_comp; ++c) {
    const std::int32_t l = comp_label[static_cast<std::size_t>(c)];
    if (keeper[static_cast<std::size_t>(l)] < 0 ||
        comp_size[static_cast<std::size_t>(c)] >
            comp_size[static_cast<std::size_t>(keeper[static_cast<std::size_t>(l)])])
      keeper[static_cast<std::size_t>(l)] = c;
  }

  // final label per component; orphans start unassigned
  std::vector<std::int32_t> final_of_comp(static_cast<std::size_t>(num_comp), -1);
  std::vector<std::int64_t> label_size(static_cast<std::size_t>(max_label) + 1, 0);
  for (int c = 0; c < num_comp; ++c) {
    const std::int32_t l = comp_label[static_cast<std::size_t>(c)];
    if (keeper[static_cast<std::size_t>(l)] == c) {
      final_of_comp[static_cast<std::size_t>(c)] = l;
      label_size[static_cast<std::size_t>(l)] += comp_size[static_cast<std::size_t>(c)];
    }
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (int c = 0; c < num_comp; ++c) {
      if (final_of_comp[static_cast<std::size_t>(c)] >= 0) continue;
      // collect adjacent finalized labels
      std::int32_t best = -1;
      std::int64_t best_size = -1;
      for (int p = 0; p < w * h; ++p) {
        if (comp[static_cast<std::size_t>(p)] != c) continue;
        const int x = p % w, y = p / w;
        const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& nb : nbr) {
          if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
          const std::int32_t nc = comp[static_cast<std::size_t>(nb[1] * w + nb[0])];
          const std::int32_t fl = final_of_comp[static_cast<std::size_t>(nc)];
          if (fl < 0) continue;
          const std::int64_t sz = label_size[static_cast<std::size_t>(fl)];
          if (sz > best_size || (sz == best_size && fl < best)) {
            best = fl;
            best_size = sz;
          }
        }
      }
      if (best >= 0) {
        final_of_comp[static_cast<std::size_t>(c)] = best;
        label_size[static_cast<std::size_t>(best)] +=
            comp_size[static_cast<std::size_t>(c)];
        progress = true;
      }
    }
  }

  // contiguous relabel by ascending original label
  std::vector<std::int32_t> remap(static_cast<std::size_t>(max_label) + 1, -1);
  std::int32_t next = 0;
  for (std::int32_t l = 0; l <= max_label; ++l)
    if (label_size[static_cast<std::size_t>(l)] > 0) remap[static_cast<std::size_t>(l)] = next++;

  SuperpixelPartition part;
  part.width = w;
  part.height = h;
  part.num_segments = next;
  part.labels.resize(static_cast<std::size_t>(w) * h);
  for (int p = 0; p < w * h; ++p)
    part.labels[static_cast<std::size_t>(p)] =
        remap[static_cast<std::size_t>(final_of_comp[static_cast<std::size_t>(comp[static_cast<std::size_t>(p)])])];
  return part;
}

}  // namespace

std::array<double, 3> rgb_to_lab(double r, double g, double b) {
  auto linearize = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double rl = linearize(r), gl = linearize(g), bl = linearize(b);
  // sRGB -> XYZ (D65)
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    const double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Image gaussian_smooth(const Image& img, double sigma) {
  img.validate();
  if (sigma < 0.0) fail("sigma must be non-negative");
  if (sigma < 1e-12) return img;

  const int len = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> mask(static_cast<std::size_t>(len) + 1);
  for (int i = 0; i <= len; ++i)
    mask[static_cast<std::size_t>(i)] =
        std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
  double sum = mask[0];
  for (int i = 1; i <= len; ++i) sum += 2.0 * mask[static_cast<std::size_t>(i)];
  for (auto& m : mask) m /= sum;

  const int w = img.width, h = img.height;
  Image tmp = img, out = img;
  // horizontal pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = mask[0] * img.at(x, y, c);
        for (int i = 1; i <= len; ++i)
          v += mask[static_cast<std::size_t>(i)] *
               (img.at(std::max(x - i, 0), y, c) + img.at(std::min(x + i, w - 1), y, c));
        tmp.at(x, y, c) = v;
      }
  // vertical pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = mask[0] * tmp.at(x, y, c);
        for (int i = 1; i <= len; ++i)
          v += mask[static_cast<std::size_t>(i)] *
               (tmp.at(x, std::max(y - i, 0), c) + tmp.at(x, std::min(y + i, h - 1), c));
        out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

SuperpixelPartition slic(const Image& img, int q, double compactness, int iters,
                         std::uint64_t /*seed*/) {
  img.validate();
  if (q < 1) fail("q must be at least 1");
  if (iters < 1) fail("iters must be at least 1");
  const int w = img.width, h = img.height;
  const int m_pixels = w * h;
  if (q > m_pixels) fail("more superpixels than pixels");

  const LabImage lab = to_lab(img);
  const double spacing = std::sqrt(static_cast<double>(m_pixels) / q);

  int ny = std::max<int>(1, static_cast<int>(std::lround(
                                std::sqrt(static_cast<double>(q) * h / w))));
  ny = std::min(ny, std::min(q, h));
  int nx = std::min(q / ny, w);
  nx = std::max(nx, 1);

  std::vector<SlicCenter> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy)
    for (int gx = 0; gx < nx; ++gx) {
      SlicCenter c;
      c.x = (gx + 0.5) * static_cast<double>(w) / nx - 0.5;
      c.y = (gy + 0.5) * static_cast<double>(h) / ny - 0.5;
      int px = std::clamp(static_cast<int>(std::floor(c.x + 0.5)), 0, w - 1);
      int py = std::clamp(static_cast<int>(std::floor(c.y + 0.5)), 0, h - 1);
      // move to a strictly lower-gradient pixel in the 3x3 neighborhood
      double best = lab_gradient(lab, px, py);
      int bx = px, by = py;
      bool moved = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x2 = px + dx, y2 = py + dy;
          if (x2 < 0 || x2 >= w || y2 < 0 || y2 >= h) continue;
          const double g = lab_gradient(lab, x2, y2);
          if (g < best) {
            best = g;
            bx = x2;
            by = y2;
            moved = true;
          }
        }
      if (moved) {
        c.x = bx;
        c.y = by;
        px = bx;
        py = by;
      }
      c.l = lab.at(px, py)[0];
      c.a = lab.at(px, py)[1];
      c.b = lab.at(px, py)[2];
      centers.push_back(c);
    }
  const int k = static_cast<int>(centers.size());

  const double inv_s2 = (compactness / spacing) * (compactness / spacing);
  const int half_x = static_cast<int>(std::ceil(std::max(spacing, static_cast<double>(w) / nx))) + 1;
  const int half_y = static_cast<int>(std::ceil(std::max(spacing, static_cast<double>(h) / ny))) + 1;

  std::vector<std::int32_t> assign(static_cast<std::size_t>(m_pixels), -1);
  std::vector<double> dist(static_cast<std::size_t>(m_pixels));
  for (int it = 0; it < iters; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (int ci = 0; ci < k; ++ci) {
      const SlicCenter& c = centers[static_cast<std::size_t>(ci)];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x)) - half_x);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x)) + half_x);
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y)) - half_y);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y)) + half_y);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double* px = lab.at(x, y);
          const double dl = px[0] - c.l, da = px[1] - c.a, db = px[2] - c.b;
          const double dx = x - c.x, dy = y - c.y;
          const double d = dl * dl + da * da + db * db + inv_s2 * (dx * dx + dy * dy);
          const std::size_t p = static_cast<std::size_t>(y * w + x);
          if (d < dist[p]) {
            dist[p] = d;
            assign[p] = static_cast<std::int32_t>(ci);
          }
        }
    }
    // window sizes cover the grid, but guard against stragglers anyway
    for (int p = 0; p < m_pixels; ++p) {
      if (assign[static_cast<std::size_t>(p)] >= 0) continue;
      const int x = p % w, y = p / w;
      const double* px = lab.at(x, y);
      double bd = std::numeric_limits<double>::infinity();
      for (int ci = 0; ci < k; ++ci) {
        const SlicCenter& c = centers[static_cast<std::size_t>(ci)];
        const double dl = px[0] - c.l, da = px[1] - c.a, db = px[2] - c.b;
        const double dx = x - c.x, dy = y - c.y;
        const double d = dl * dl + da * da + db * db + inv_s2 * (dx * dx + dy * dy);
        if (d < bd) {
          bd = d;
          assign[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(ci);
        }
      }
    }
    // recompute centers
    std::vector<SlicCenter> sums(static_cast<std::size_t>(k));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::int32_t ci = assign[static_cast<std::size_t>(y * w + x)];
        SlicCenter& s = sums[static_cast<std::size_t>(ci)];
        const double* px = lab.at(x, y);
        s.l += px[0];
        s.a += px[1];
        s.b += px[2];
        s.x += x;
        s.y += y;
        ++counts[static_cast<std::size_t>(ci)];
      }
    for (int ci = 0; ci < k; ++ci) {
      if (counts[static_cast<std::size_t>(ci)] == 0) continue;  // keep stale center
      const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(ci)]);
      SlicCenter& c = centers[static_cast<std::size_t>(ci)];
      const SlicCenter& s = sums[static_cast<std::size_t>(ci)];
      c.l = s.l * inv;
      c.a = s.a * inv;
      c.b = s.b * inv;
      c.x = s.x * inv;
      c.y = s.y * inv;
    }
  }

  return enforce_connectivity(assign, w, h);
}

namespace {

struct FhEdge {
  float w;
  std::int32_t a, b;
};

struct FhUnionFind {
  std::vector<std::int32_t> parent;
  std::vector<std::int32_t> rank;
  std::vector<std::int64_t> size;
  explicit FhUnionFind(int n)
      : parent(static_cast<std::size_t>(n)),
        rank(static_cast<std::size_t>(n), 0),
        size(static_cast<std::size_t>(n), 1) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::int32_t find(std::int32_t x) {
    std::int32_t root = x;
    while (parent[static_cast<std::size_t>(root)] != root)
      root = parent[static_cast<std::size_t>(root)];
    while (parent[static_cast<std::size_t>(x)] != root) {
      const std::int32_t next = parent[static_cast<std::size_t>(x)];
      parent[static_cast<std::size_t>(x)] = root;
      x = next;
    }
    return root;
  }
  std::int32_t join(std::int32_t a, std::int32_t b) {
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)])
      std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)])
      ++rank[static_cast<std::size_t>(a)];
    return a;
  }
};

}  // namespace

SuperpixelPartition felzenszwalb(const Image& img, double scale, double sigma,
                                 int min_size) {
  img.validate();
  if (!(scale > 0.0)) fail("scale must be positive");
  if (sigma < 0.0) fail("sigma must be non-negative");
  if (min_size < 1) fail("min_size must be at least 1");

  const Image smoothed = gaussian_smooth(img, sigma);
  const int w = img.width, h = img.height;
  const int n = w * h;

  // edge weights in 8-bit channel units
  auto weight = [&](int pa, int pb) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = 255.0 * (smoothed.rgb[static_cast<std::size_t>(pa) * 3 + c] -
                                smoothed.rgb[static_cast<std::size_t>(pb) * 3 + c]);
      s += d * d;
    }
    return static_cast<float>(std::sqrt(s));
  };

  std::vector<FhEdge> edges;
  edges.reserve(static_cast<std::size_t>(n) * 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::int32_t p = y * w + x;
      if (x + 1 < w) edges.push_back({weight(p, p + 1), p, p + 1});
      if (y + 1 < h) edges.push_back({weight(p, p + w), p, p + w});
      if (x + 1 < w && y + 1 < h) edges.push_back({weight(p, p + w + 1), p, p + w + 1});
      if (x - 1 >= 0 && y + 1 < h) edges.push_back({weight(p, p + w - 1), p, p + w - 1});
    }
  std::sort(edges.begin(), edges.end(), [](const FhEdge& a, const FhEdge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.a != b.a) return a.a < b.a;
    return a.b < b.b;
  });

  FhUnionFind uf(n);
  std::vector<double> thr(static_cast<std::size_t>(n), scale);
  for (const FhEdge& e : edges) {
    const std::int32_t ra = uf.find(e.a);
    const std::int32_t rb = uf.find(e.b);
    if (ra == rb) continue;
    if (e.w <= thr[static_cast<std::size_t>(ra)] && e.w <= thr[static_cast<std::size_t>(rb)]) {
      const std::int32_t r = uf.join(ra, rb);
      thr[static_cast<std::size_t>(r)] =
          e.w + scale / static_cast<double>(uf.size[static_cast<std::size_t>(r)]);
    }
  }
  // merge components below min_size along remaining edges in weight order
  for (const FhEdge& e : edges) {
    const std::int32_t ra = uf.find(e.a);
    const std::int32_t rb = uf.find(e.b);
    if (ra == rb) continue;
    if (uf.size[static_cast<std::size_t>(ra)] < min_size ||
        uf.size[static_cast<std::size_t>(rb)] < min_size)
      uf.join(ra, rb);
  }

  std::vector<std::int32_t> root_label(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) root_label[static_cast<std::size_t>(p)] = uf.find(p);

  // the 8-connected graph can leave diagonal-only fragments: split into
  // 4-connected components, then fold sub-min_size fragments into the most
  // color-similar 4-adjacent component
  std::vector<std::int32_t> comp_label;
  std::vector<std::int64_t> comp_size;
  std::vector<std::int32_t> comp = connected_components(root_label, w, h, comp_label, comp_size);
  int num_comp = static_cast<int>(comp_label.size());

  std::vector<std::array<double, 3>> comp_mean(static_cast<std::size_t>(num_comp), {0, 0, 0});
  for (int p = 0; p < n; ++p) {
    const std::int32_t c = comp[static_cast<std::size_t>(p)];
    for (int ch = 0; ch < 3; ++ch)
      comp_mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)] +=
          255.0 * smoothed.rgb[static_cast<std::size_t>(p) * 3 + ch];
  }
  for (int c = 0; c < num_comp; ++c)
    for (int ch = 0; ch < 3; ++ch)
      comp_mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)] /=
          static_cast<double>(comp_size[static_cast<std::size_t>(c)]);

  // alias map applied as fragments merge
  std::vector<std::int32_t> alias(static_cast<std::size_t>(num_comp));
  std::iota(alias.begin(), alias.end(), 0);
  auto resolve = [&](std::int32_t c) {
    while (alias[static_cast<std::size_t>(c)] != c) c = alias[static_cast<std::size_t>(c)];
    return c;
  };

  bool merged = true;
  while (merged && num_comp > 1) {
    merged = false;
    for (std::int32_t c = 0; c < static_cast<std::int32_t>(alias.size()); ++c) {
      if (resolve(c) != c) continue;
      if (comp_size[static_cast<std::size_t>(c)] >= min_size) continue;
      // most similar 4-adjacent component by mean color
      std::int32_t best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int p = 0; p < n; ++p) {
        if (resolve(comp[static_cast<std::size_t>(p)]) != c) continue;
        const int x = p % w, y = p / w;
        const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& nb : nbr) {
          if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
          const std::int32_t oc = resolve(comp[static_cast<std::size_t>(nb[1] * w + nb[0])]);
          if (oc == c) continue;
          double d = 0.0;
          for (int ch = 0; ch < 3; ++ch) {
            const double dd = comp_mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)] -
                              comp_mean[static_cast<std::size_t>(oc)][static_cast<std::size_t>(ch)];
            d += dd * dd;
          }
          if (d < best_d || (d == best_d && oc < best)) {
            best_d = d;
            best = oc;
          }
        }
      }
      if (best >= 0) {
        const std::int64_t sa = comp_size[static_cast<std::size_t>(c)];
        const std::int64_t sb = comp_size[static_cast<std::size_t>(best)];
        for (int ch = 0; ch < 3; ++ch)
          comp_mean[static_cast<std::size_t>(best)][static_cast<std::size_t>(ch)] =
              (comp_mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)] * sa +
               comp_mean[static_cast<std::size_t>(best)][static_cast<std::size_t>(ch)] * sb) /
              static_cast<double>(sa + sb);
        comp_size[static_cast<std::size_t>(best)] += sa;
        alias[static_cast<std::size_t>(c)] = best;
        --num_comp;
        merged = true;
      }
    }
  }

  // contiguous relabel in scan order
  SuperpixelPartition part;
  part.width = w;
  part.height = h;
  part.labels.resize(static_cast<std::size_t>(n));
  std::vector<std::int32_t> remap(alias.size(), -1);
  std::int32_t next = 0;
  for (int p = 0; p < n; ++p) {
    const std::int32_t c = resolve(comp[static_cast<std::size_t>(p)]);
    if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
    part.labels[static_cast<std::size_t>(p)] = remap[static_cast<std::size_t>(c)];
  }
  part.num_segments = next;
  return part;
}

PartitionStats partition_stats(const SuperpixelPartition& part) {
  if (part.num_segments < 1 || part.labels.size() !=
                                   static_cast<std::size_t>(part.width) * part.height)
    fail("invalid partition");
  PartitionStats stats;
  stats.counts.assign(static_cast<std::size_t>(part.num_segments), 0);
  for (std::int32_t l : part.labels) {
    if (l < 0 || l >= part.num_segments) fail("label out of range");
    ++stats.counts[static_cast<std::size_t>(l)];
  }
  for (int y = 0; y < part.height; ++y)
    for (int x = 0; x < part.width; ++x) {
      if (x + 1 < part.width && part.label(x, y) != part.label(x + 1, y))
        ++stats.boundary_length;
      if (y + 1 < part.height && part.label(x, y) != part.label(x, y + 1))
        ++stats.boundary_length;
    }
  return stats;
}

void validate_partition(const SuperpixelPartition& part) {
  const PartitionStats stats = partition_stats(part);  // range + coverage
  for (std::int64_t c : stats.counts)
    if (c == 0) fail("partition has an empty label");
  std::vector<std::int32_t> comp_label;
  std::vector<std::int64_t> comp_size;
  connected_components(part.labels, part.width, part.height, comp_label, comp_size);
  std::vector<int> comps_per_label(static_cast<std::size_t>(part.num_segments), 0);
  for (std::int32_t l : comp_label) ++comps_per_label[static_cast<std::size_t>(l)];
  for (int c : comps_per_label)
    if (c != 1) fail("partition label is not 4-connected");
}

void write_partition_pgm(const std::string& path, const SuperpixelPartition& part) {
  if (part.num_segments > 65536) fail("too many segments for 16-bit PGM");
  std::vector<std::uint16_t> v(part.labels.size());
  for (std::size_t i = 0; i < part.labels.size(); ++i)
    v[i] = static_cast<std::uint16_t>(part.labels[i]);
  write_pgm16(path, v, part.width, part.height);
}

SuperpixelPartition read_partition_pgm(const std::string& path) {
  SuperpixelPartition part;
  const std::vector<std::uint16_t> v = read_pgm16(path, part.width, part.height);
  part.labels.resize(v.size());
  std::int32_t max_label = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    part.labels[i] = static_cast<std::int32_t>(v[i]);
    max_label = std::max(max_label, part.labels[i]);
  }
  part.num_segments = max_label + 1;
  return part;
}

}  // namespace slidr
