#pragma once

#include <algorithm>
#include <vector>

#include "vqa/kernels.hpp"
#include "vqa/resample.hpp"

namespace vqa::detail {

inline std::array<int, 3> level_dims(std::array<int, 3> dims, int factor) {
  for (auto& d : dims) d = std::max(1, (d + factor - 1) / factor);
  return dims;
}

/// Gaussian pre-smoothing (sigma = factor / 2 voxels) then extent-preserving downsampling.
inline Volume downsample(const Volume& v, int factor) {
  if (factor <= 1) return v;
  Volume smooth(v.geometry());
  const double s = 0.5 * factor;
  kernels::gaussian_smooth(v.data(), smooth.data(), kernels::grid_of(v.geometry()), {s, s, s});
  return resample(smooth, level_dims(v.dims(), factor), InterpMode::Linear);
}

/// Per-level downsampling factors, coarsest first.
inline std::vector<int> pyramid_factors(int levels) {
  std::vector<int> f;
  for (int l = levels - 1; l >= 0; --l) f.push_back(1 << l);
  return f;
}

}  // namespace vqa::detail
