#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slidr/image.hpp"

namespace slidr {

/// Per-pixel superpixel labels; ids are contiguous in [0, num_segments) and
/// every label's pixel set is 4-connected.
struct SuperpixelPartition {
  int width = 0, height = 0;
  std::vector<std::int32_t> labels;  // H*W row-major
  std::int32_t num_segments = 0;

  std::int32_t label(int x, int y) const {
    return labels[static_cast<std::size_t>(y * width + x)];
  }
  std::int32_t& label(int x, int y) {
    return labels[static_cast<std::size_t>(y * width + x)];
  }
};

/// Throws unless the partition covers every pixel with contiguous ids and
/// each label forms a single 4-connected component.
void validate_partition(const SuperpixelPartition& part);

/// SLIC in CIELAB (D65) + (x,y) space. Deterministic; the seed does not
/// influence the result and is accepted for interface uniformity.
SuperpixelPartition slic(const Image& img, int q, double compactness,
                         int iters, std::uint64_t seed);

/// Felzenszwalb-Huttenlocher graph segmentation: Gaussian smoothing,
/// 8-connected grid graph with RGB edge weights (8-bit channel units),
/// threshold tau(C) = scale/|C|, then min-size merging.
SuperpixelPartition felzenszwalb(const Image& img, double scale, double sigma,
                                 int min_size);

struct PartitionStats {
  std::vector<std::int64_t> counts;   // per label
  std::int64_t boundary_length = 0;   // 4-adjacent pairs with differing labels
};
PartitionStats partition_stats(const SuperpixelPartition& part);

/// Separable Gaussian smoothing with clamped borders; sigma == 0 is the
/// identity. Kernel half-width ceil(4*sigma).
Image gaussian_smooth(const Image& img, double sigma);

std::array<double, 3> rgb_to_lab(double r, double g, double b);

void write_partition_pgm(const std::string& path,
                         const SuperpixelPartition& part);
SuperpixelPartition read_partition_pgm(const std::string& path);

}  // namespace slidr
