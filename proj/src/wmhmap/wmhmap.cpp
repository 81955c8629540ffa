#include "vqa/wmhmap.hpp"

#include <cmath>

#include "vqa/error.hpp"

namespace vqa {

Mask warp_wmh(const Mask& wmh, const Transform& final_transform, const Geometry& general_grid) {
  if (!final_transform.is_affine() && !same_grid(final_transform.field().geometry, general_grid))
    throw Error(ErrorCode::GeometryMismatch, "warp_wmh: transform is not on the general grid");
  return warp(wmh, final_transform, general_grid);
}

Mask warp_wmh(const Mask& wmh, const MarResult& r) {
  if (r.final_transform.is_affine())
    throw Error(ErrorCode::GeometryMismatch, "warp_wmh: affine final transform carries no general grid");
  return warp(wmh, r.final_transform);
}

bool passes_threshold(double quality, double threshold) {
  return threshold == 0 ? quality >= 0 : quality > threshold;
}

BurdenMap build_burden_map(std::span<const BurdenEntry> entries, double threshold, const Geometry& grid) {
  if (!std::isfinite(threshold) || threshold < 0 || threshold > 1)
    throw Error(ErrorCode::InvalidArgument, "burden threshold must lie in [0, 1]");
  BurdenMap b;
  b.threshold = threshold;
  b.n_total = static_cast<int>(entries.size());
  b.map = Volume(grid);
  std::vector<std::uint32_t> hits(b.map.size(), 0);
  for (const auto& e : entries) {
    if (!same_grid(e.wmh.geometry(), grid))
      throw Error(ErrorCode::GeometryMismatch, "burden map: mask not in general-atlas space");
    if (!passes_threshold(e.quality, threshold)) continue;
    ++b.n_included;
    const auto m = e.wmh.data();
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += m[i] != 0;
  }
  if (b.n_included == 0) {
    b.flags.emplace_back(to_string(ErrorCode::NoSubjectsPass));
    return b;
  }
  const double n = b.n_included;
  for (std::size_t i = 0; i < hits.size(); ++i) b.map[i] = static_cast<float>(hits[i] / n);
  return b;
}

BurdenMap build_burden_map(std::span<const BurdenEntry> entries, double threshold) {
  if (entries.empty()) throw Error(ErrorCode::EmptyList, "burden map: no entries");
  return build_burden_map(entries, threshold, entries.front().wmh.geometry());
}

double map_error(const BurdenMap& m, const Volume& reference) {
  if (!same_grid(m.map.geometry(), reference.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "map_error: grids differ");
  if (reference.size() == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) s += std::fabs(double(m.map[i]) - double(reference[i]));
  return s / static_cast<double>(reference.size());
}

}  // namespace vqa
