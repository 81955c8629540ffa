#include "vqa/resample.hpp"

#include <algorithm>

#include "vqa/kernels.hpp"

namespace vqa {

namespace {

kernels::Interp to_kernel(InterpMode m) {
  return m == InterpMode::Linear ? kernels::Interp::Linear : kernels::Interp::Nearest;
}

// Source continuous index of target voxel i: (i + 0.5) * n / n' - 0.5.
AffineMap extent_preserving_map(std::array<int, 3> src, std::array<int, 3> dst) {
  AffineMap m;
  for (int a = 0; a < 3; ++a) {
    const double ratio = double(src[a]) / double(dst[a]);
    m.linear[4 * a] = ratio;
    m.offset[a] = 0.5 * ratio - 0.5;
  }
  return m;
}

}  // namespace

Geometry rescaled_grid(const Geometry& g, std::array<int, 3> dims) {
  for (int d : dims)
    if (d <= 0) throw Error(ErrorCode::InvalidArgument, "target dims must be positive");
  Geometry out = g;
  out.dims = dims;
  const AffineMap m = extent_preserving_map(g.dims, dims);
  for (int a = 0; a < 3; ++a) out.spacing[a] = g.spacing[a] * m.linear[4 * a];
  out.origin = g.to_world(m.offset);
  return out;
}

Volume resample(const Volume& v, std::array<int, 3> target_dims, InterpMode mode) {
  const Geometry tg = rescaled_grid(v.geometry(), target_dims);
  Volume out(tg);
  kernels::SampleSpec spec;
  spec.target = kernels::grid_of(tg);
  spec.source = kernels::grid_of(v.geometry());
  // index space of the source stands in for world space: the map is exact for equal dims
  spec.target_index_to_world = extent_preserving_map(v.dims(), target_dims);
  spec.interp = to_kernel(mode);
  const float* src[] = {v.data().data()};
  float* dst[] = {out.data().data()};
  kernels::sample(spec, src, dst);
  return out;
}

Mask resample(const Mask& m, std::array<int, 3> target_dims) {
  return to_mask(resample(to_volume(m), target_dims, InterpMode::Nearest));
}

Volume resample_to(const Volume& src, const Geometry& target, InterpMode mode) {
  Volume out(target);
  kernels::SampleSpec spec;
  spec.target = kernels::grid_of(target);
  spec.source = kernels::grid_of(src.geometry());
  spec.target_index_to_world = target.index_to_world();
  spec.world_to_source_index = src.geometry().world_to_index();
  spec.interp = to_kernel(mode);
  const float* s[] = {src.data().data()};
  float* d[] = {out.data().data()};
  kernels::sample(spec, s, d);
  return out;
}

Volume pad_slices(const Volume& v, int target_z) {
  const auto& g = v.geometry();
  if (target_z < g.dims[2]) throw Error(ErrorCode::TargetSmallerThanSource, "target_z smaller than slice count");
  const int below = (target_z - g.dims[2]) / 2;
  Geometry pg = g;
  pg.dims[2] = target_z;
  pg.origin = g.to_world({0.0, 0.0, -double(below)});
  Volume out(pg, 0.0f);
  const std::size_t slice = std::size_t(g.dims[0]) * g.dims[1];
  std::copy(v.data().begin(), v.data().end(), out.data().begin() + std::ptrdiff_t(slice * below));
  return out;
}

Mask pad_slices(const Mask& m, int target_z) { return to_mask(pad_slices(to_volume(m), target_z)); }

Volume crop_slices(const Volume& v, int first, int count) {
  const auto& g = v.geometry();
  if (first < 0 || count <= 0 || first + count > g.dims[2])
    throw Error(ErrorCode::InvalidArgument, "crop range outside volume");
  Geometry cg = g;
  cg.dims[2] = count;
  cg.origin = g.to_world({0.0, 0.0, double(first)});
  const std::size_t slice = std::size_t(g.dims[0]) * g.dims[1];
  std::vector<float> data(v.data().begin() + std::ptrdiff_t(slice * first),
                          v.data().begin() + std::ptrdiff_t(slice * (first + count)));
  return Volume(cg, std::move(data));
}

}  // namespace vqa
