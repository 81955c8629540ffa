#pragma once

#include <span>

#include "vqa/volume.hpp"

namespace vqa {

/// Nearest-rank percentile: the value at 1-based rank ceil(q * N) of the sorted data.
float percentile_nearest_rank(std::span<const float> values, double q);

/// Maps the 1st percentile to 0 and the 99th to 1 over all voxels, unmasked, without clipping.
Volume percentile_normalize(const Volume& v);

/// Maps min to 0 and max to 1.
Volume minmax_rescale(const Volume& v);

/// Splits voxels at the image mean and maps the median of the lower part to 0
/// and the median of the upper part to 1. Noise and small bright or dark
/// structures barely move either median.
Volume robust_rescale(const Volume& v);

/// Mean of `v` over the foreground of `mask`.
double masked_mean(const Volume& v, const Mask& mask);

/// Median of `v` over the foreground of `mask` (lower median for even counts).
double masked_median(const Volume& v, const Mask& mask);

}  // namespace vqa
