#include "slidr/correspondence.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace slidr {

SuperpointGroups group_superpoints(const PixelMap& pm,
                                   const std::vector<SuperpixelPartition>& parts) {
  if (pm.cameras.size() != parts.size())
    fail("pixel map and partitions disagree on camera count");
  SuperpointGroups groups;
  groups.cameras.resize(pm.cameras.size());
  for (std::size_t c = 0; c < pm.cameras.size(); ++c) {
    const PixelMap::Plane& plane = pm.cameras[c];
    const SuperpixelPartition& part = parts[c];
    if (plane.width != part.width || plane.height != part.height)
      fail("pixel map and partition disagree on image size");
    auto& per_camera = groups.cameras[c];
    for (std::int64_t i = 0; i < pm.num_points; ++i) {
      const std::uint32_t m = plane.pixel[static_cast<std::size_t>(i)];
      if (m == 0) continue;
      const std::int64_t flat = static_cast<std::int64_t>(m) - 1;
      const std::int32_t s = part.labels[static_cast<std::size_t>(flat)];
      per_camera[s].push_back(i);
    }
    // insertion was in ascending point order already; keep it explicit
    for (auto& [s, members] : per_camera) std::sort(members.begin(), members.end());
  }
  return groups;
}

SuperpointGroups group_pairs(const PairList& pairs,
                             const std::vector<SuperpixelPartition>& parts) {
  SuperpointGroups groups;
  groups.cameras.resize(parts.size());
  for (const Pair& p : pairs) {
    if (p.camera < 0 || static_cast<std::size_t>(p.camera) >= parts.size())
      fail("pair camera out of range");
    const SuperpixelPartition& part = parts[static_cast<std::size_t>(p.camera)];
    if (p.pixel == 0 ||
        p.pixel > static_cast<std::uint32_t>(part.width) * part.height)
      fail("pair pixel out of range");
    const std::int32_t s = part.labels[static_cast<std::size_t>(p.pixel) - 1];
    groups.cameras[static_cast<std::size_t>(p.camera)][s].push_back(p.point);
  }
  for (auto& per_camera : groups.cameras)
    for (auto& [s, members] : per_camera) std::sort(members.begin(), members.end());
  return groups;
}

PairList pairs_from_map(const PixelMap& pm) {
  PairList pairs;
  for (std::size_t c = 0; c < pm.cameras.size(); ++c) {
    const PixelMap::Plane& plane = pm.cameras[c];
    for (std::int64_t i = 0; i < pm.num_points; ++i) {
      const std::uint32_t m = plane.pixel[static_cast<std::size_t>(i)];
      if (m != 0) pairs.push_back({i, static_cast<int>(c), m});
    }
  }
  return pairs;
}

std::string groups_to_json(const SuperpointGroups& groups) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t c = 0; c < groups.cameras.size(); ++c) {
    nlohmann::json jc;
    jc["camera"] = c;
    nlohmann::json jg = nlohmann::json::object();
    for (const auto& [s, members] : groups.cameras[c])
      jg[std::to_string(s)] = members;
    jc["groups"] = jg;
    doc.push_back(jc);
  }
  return doc.dump(2);
}

void write_pairs_csv(const std::string& path, const PairList& pairs) {
  std::ofstream f(path);
  if (!f) fail("cannot open for writing: " + path);
  f << "i,c,m\n";
  for (const Pair& p : pairs) f << p.point << "," << p.camera << "," << p.pixel << "\n";
  if (!f) fail("write failed: " + path);
}

PairList read_pairs_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "i,c,m") fail("bad pairs csv header: " + path);
  PairList pairs;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Pair p;
    char comma1 = 0, comma2 = 0;
    ss >> p.point >> comma1 >> p.camera >> comma2 >> p.pixel;
    if (!ss || comma1 != ',' || comma2 != ',') fail("bad pairs csv row: " + line);
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace slidr
