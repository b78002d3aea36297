#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slidr/geometry.hpp"
#include "slidr/superpixels.hpp"

namespace slidr {

/// One point-pixel correspondence; `pixel` is 1-based row-major and never 0.
struct Pair {
  std::int64_t point = 0;
  int camera = 0;
  std::uint32_t pixel = 0;
};
using PairList = std::vector<Pair>;

/// Per camera: superpixel id -> sorted point indices. Only non-empty groups
/// are stored.
struct SuperpointGroups {
  std::vector<std::map<std::int32_t, std::vector<std::int64_t>>> cameras;
};

SuperpointGroups group_superpoints(const PixelMap& pm,
                                   const std::vector<SuperpixelPartition>& parts);

/// Same grouping but driven by an explicit pair list (the training path,
/// where pairs have been carried through augmentations).
SuperpointGroups group_pairs(const PairList& pairs,
                             const std::vector<SuperpixelPartition>& parts);

PairList pairs_from_map(const PixelMap& pm);

std::string groups_to_json(const SuperpointGroups& groups);

void write_pairs_csv(const std::string& path, const PairList& pairs);
PairList read_pairs_csv(const std::string& path);

}  // namespace slidr
