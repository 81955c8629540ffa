#pragma once

#include <array>

#include "vqa/volume.hpp"

namespace vqa {

enum class InterpMode { Linear, Nearest };

/// Resamples onto `target_dims` voxels covering the same physical extent.
/// Out-of-bounds samples take edge-clamped values.
Volume resample(const Volume& v, std::array<int, 3> target_dims, InterpMode mode);
Mask resample(const Mask& m, std::array<int, 3> target_dims);

/// Zero-pads along z to `target_z` slices (odd extra slice goes on top) and
/// shifts the origin so existing voxels keep their world coordinates.
Volume pad_slices(const Volume& v, int target_z);
Mask pad_slices(const Mask& m, int target_z);

/// Inverse of pad_slices: keeps `count` slices starting at `first`.
Volume crop_slices(const Volume& v, int first, int count);

/// Samples `src` at the voxel centres of `target` (world-coordinate lookup).
Volume resample_to(const Volume& src, const Geometry& target, InterpMode mode);

/// Geometry covering the same extent as `g` with `dims` voxels.
Geometry rescaled_grid(const Geometry& g, std::array<int, 3> dims);

}  // namespace vqa
