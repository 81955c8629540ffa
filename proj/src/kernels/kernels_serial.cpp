#include <vector>

#include "kernels/rows.hpp"

namespace vqa::kernels::serial {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::DimMismatch, "kernel buffer sizes differ");
}

}  // namespace

void gaussian_smooth(std::span<const float> in, std::span<float> out, Grid g, std::array<double, 3> sigma) {
  check_sizes(in.size(), g.size());
  check_sizes(out.size(), g.size());
  std::vector<float> cur(in.begin(), in.end());
  std::vector<float> tmp(g.size());
  using RowFn = void (*)(const float*, float*, const Grid&, const std::vector<float>&, int, int);
  const RowFn rows[3] = {detail::smooth_x_row, detail::smooth_y_row, detail::smooth_z_row};
  for (int axis = 0; axis < 3; ++axis) {
    if (sigma[axis] <= 0) continue;
    const auto w = detail::gaussian_weights(sigma[axis]);
    const int lines = g.ny * g.nz;
    const RowFn fn = rows[axis];
    for (int line = 0; line < lines; ++line) fn(cur.data(), tmp.data(), g, w, line % g.ny, line / g.ny);
    cur.swap(tmp);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

void sample(const SampleSpec& spec, std::span<const float* const> sources, std::span<float* const> outputs) {
  if (sources.size() != outputs.size()) throw Error(ErrorCode::InvalidArgument, "channel count mismatch");
  const auto plan = detail::make_plan(spec);
  const int lines = spec.target.ny * spec.target.nz;
  for (int line = 0; line < lines; ++line)
    detail::sample_row(spec, plan, sources, outputs, line % spec.target.ny, line / spec.target.ny);
}

void gradient(std::span<const float> in, Grid g, Field3 out) {
  check_sizes(in.size(), g.size());
  const int lines = g.ny * g.nz;
  for (int line = 0; line < lines; ++line) detail::gradient_row(in.data(), g, out, line % g.ny, line / g.ny);
}

Confusion confusion(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> prediction, Grid g) {
  check_sizes(reference.size(), g.size());
  check_sizes(prediction.size(), g.size());
  const std::size_t slice = std::size_t(g.nx) * g.ny;
  std::vector<Confusion> partial(g.nz);
  for (int k = 0; k < g.nz; ++k)
    partial[k] = detail::confusion_slice(reference.data() + k * slice, prediction.data() + k * slice, slice);
  Confusion total;
  for (const auto& p : partial) detail::add(total, p);
  return total;
}

PairMoments pair_moments(std::span<const float> a, std::span<const float> b, Grid g) {
  check_sizes(a.size(), g.size());
  check_sizes(b.size(), g.size());
  const std::size_t slice = std::size_t(g.nx) * g.ny;
  std::vector<PairMoments> partial(g.nz);
  for (int k = 0; k < g.nz; ++k) partial[k] = detail::moments_slice(a.data() + k * slice, b.data() + k * slice, slice);
  PairMoments total;
  for (const auto& p : partial) detail::add(total, p);
  return total;
}

double demons_update(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_fixed,
                     ConstField3 grad_warped, double step, Grid g, Field3 update) {
  check_sizes(fixed.size(), g.size());
  check_sizes(warped.size(), g.size());
  const std::size_t slice = std::size_t(g.nx) * g.ny;
  std::vector<double> partial(g.nz);
  for (int k = 0; k < g.nz; ++k)
    partial[k] = detail::demons_slice(fixed.data(), warped.data(), grad_fixed, grad_warped, step, update,
                                      k * slice, (k + 1) * slice);
  double total = 0;
  for (double p : partial) total += p;
  return total;
}

AffineMoments affine_moments(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_warped,
                             const AffineMap& index_to_coords, Grid g) {
  check_sizes(fixed.size(), g.size());
  check_sizes(warped.size(), g.size());
  std::vector<AffineMoments> partial(g.nz);
  for (int k = 0; k < g.nz; ++k)
    partial[k] = detail::affine_slice(fixed.data(), warped.data(), grad_warped, index_to_coords, g, k);
  AffineMoments total;
  for (const auto& p : partial) detail::add(total, p);
  return total;
}

}  // namespace vqa::kernels::serial
