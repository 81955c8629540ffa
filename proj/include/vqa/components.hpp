#pragma once

#include <cstdint>
#include <vector>

#include "vqa/volume.hpp"

namespace vqa {

enum class Connectivity { Six = 6, TwentySix = 26 };

/// Foreground regions of a mask. Labels are 1..n, ordered by each region's
/// smallest linear voxel index; 0 is background.
struct Components {
  std::vector<std::int32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[l - 1] for label l

  std::size_t count() const { return sizes.size(); }
  /// Linear voxel indices of each region, ascending.
  std::vector<std::vector<std::size_t>> regions() const;
};

Components connected_components(const Mask& m, Connectivity connectivity = Connectivity::TwentySix);

/// Accepts 6 or 26.
Connectivity connectivity_from_int(int n);

}  // namespace vqa
