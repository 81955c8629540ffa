#pragma once

#include <span>
#include <string>
#include <vector>

#include "vqa/mar.hpp"
#include "vqa/volume.hpp"

namespace vqa {

struct BurdenMap {
  Volume map;  // general-atlas space, values in [0, 1]
  int n_included = 0;
  int n_total = 0;
  double threshold = 0;
  std::vector<std::string> flags;
};

struct BurdenEntry {
  Mask wmh;  // already in general-atlas space
  double quality = 0;
};

/// Subject WMH mask pulled into general space through r.final_transform.
Mask warp_wmh(const Mask& wmh, const MarResult& r);
Mask warp_wmh(const Mask& wmh, const Transform& final_transform, const Geometry& general_grid);

/// Q > T for T > 0; every entry with Q >= 0 at T = 0. When nothing passes the
/// map is all zero on `grid`, n_included is 0 and the flag NoSubjectsPass is set.
bool passes_threshold(double quality, double threshold);
BurdenMap build_burden_map(std::span<const BurdenEntry> entries, double threshold, const Geometry& grid);
/// Grid taken from the first entry; throws EmptyList when there are none.
BurdenMap build_burden_map(std::span<const BurdenEntry> entries, double threshold);

/// Mean absolute voxelwise difference.
double map_error(const BurdenMap& m, const Volume& reference);

}  // namespace vqa
