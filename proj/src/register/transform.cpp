#include "vqa/transform.hpp"

#include <algorithm>
#include <cmath>

namespace vqa {

namespace {

kernels::Interp to_kernel(InterpMode m) {
  return m == InterpMode::Linear ? kernels::Interp::Linear : kernels::Interp::Nearest;
}

// Spec sampling the source grid `src` at map(x) for every voxel x of `target`.
kernels::SampleSpec spec_for(const Transform& t, const Geometry& target, const Geometry& src) {
  kernels::SampleSpec s;
  s.target = kernels::grid_of(target);
  s.source = kernels::grid_of(src);
  s.target_index_to_world = target.index_to_world();
  s.world_to_source_index = src.world_to_index();
  if (t.is_affine()) {
    s.post = t.affine();
  } else {
    const auto& f = t.field();
    if (!same_grid(f.geometry, target)) throw Error(ErrorCode::GeometryMismatch, "field grid differs from warp target");
    s.displacement = f.channels();
  }
  return s;
}

// Interpolates the displacement of a dense transform at map_outer(x) for x on `grid`.
DisplacementField sample_field(const DisplacementField& f, const kernels::SampleSpec& base) {
  DisplacementField out;
  kernels::SampleSpec s = base;
  s.source = kernels::grid_of(f.geometry);
  s.world_to_source_index = f.geometry.world_to_index();
  s.interp = kernels::Interp::Linear;
  s.boundary = kernels::Boundary::Clamp;
  out.x.resize(s.target.size());
  out.y.resize(s.target.size());
  out.z.resize(s.target.size());
  const float* src[] = {f.x.data(), f.y.data(), f.z.data()};
  float* dst[] = {out.x.data(), out.y.data(), out.z.data()};
  kernels::sample(s, src, dst);
  return out;
}

DisplacementField affine_field(const AffineMap& a, const Geometry& grid) {
  DisplacementField out(grid);
  const auto [nx, ny, nz] = grid.dims;
  const AffineMap i2w = grid.index_to_world();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        const Vec3 x = i2w.apply({double(i), double(j), double(k)});
        const Vec3 d = a.apply(x) - x;
        out.x[idx] = float(d[0]);
        out.y[idx] = float(d[1]);
        out.z[idx] = float(d[2]);
      }
  return out;
}

}  // namespace

DisplacementField::DisplacementField(const Geometry& g)
    : geometry(g), x(g.voxel_count(), 0.0f), y(g.voxel_count(), 0.0f), z(g.voxel_count(), 0.0f) {}

double DisplacementField::max_norm() const {
  double m = 0;
  for (std::size_t i = 0; i < size(); ++i)
    m = std::max(m, double(x[i]) * x[i] + double(y[i]) * y[i] + double(z[i]) * z[i]);
  return std::sqrt(m);
}

void DisplacementField::check_finite() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || !std::isfinite(z[i]))
      throw Error(ErrorCode::NonFiniteField, "displacement field contains non-finite values");
}

DisplacementField DisplacementField::scaled(double s) const {
  DisplacementField out = *this;
  for (std::size_t i = 0; i < size(); ++i) {
    out.x[i] = float(s * x[i]);
    out.y[i] = float(s * y[i]);
    out.z[i] = float(s * z[i]);
  }
  return out;
}

Vec3 Transform::map(const Vec3& world) const {
  if (is_affine()) return affine().apply(world);
  const auto& f = field();
  const Vec3 c = f.geometry.to_index(world);
  const kernels::Grid g = kernels::grid_of(f.geometry);
  // single-point lookup through the same interpolation as the kernels
  kernels::SampleSpec s;
  s.target = {1, 1, 1};
  s.source = g;
  s.target_index_to_world.offset = c;
  const float* src[] = {f.x.data(), f.y.data(), f.z.data()};
  float ux = 0, uy = 0, uz = 0;
  float* dst[] = {&ux, &uy, &uz};
  kernels::serial::sample(s, src, dst);
  return world + Vec3{ux, uy, uz};
}

Volume warp(const Volume& v, const Transform& t, const Geometry& target, InterpMode mode) {
  kernels::SampleSpec s = spec_for(t, target, v.geometry());
  s.interp = to_kernel(mode);
  Volume out(target);
  const float* src[] = {v.data().data()};
  float* dst[] = {out.data().data()};
  kernels::sample(s, src, dst);
  return out;
}

Volume warp(const Volume& v, const Transform& t, InterpMode mode) {
  return warp(v, t, t.is_affine() ? v.geometry() : t.field().geometry, mode);
}

Mask warp(const Mask& m, const Transform& t, const Geometry& target) {
  return to_mask(warp(to_volume(m), t, target, InterpMode::Nearest));
}

Mask warp(const Mask& m, const Transform& t) {
  return warp(m, t, t.is_affine() ? m.geometry() : t.field().geometry);
}

DisplacementField to_field(const Transform& t, const Geometry& grid) {
  if (t.is_affine()) return affine_field(t.affine(), grid);
  const auto& f = t.field();
  if (same_grid(f.geometry, grid)) return f;
  kernels::SampleSpec s;
  s.target = kernels::grid_of(grid);
  s.target_index_to_world = grid.index_to_world();
  DisplacementField out = sample_field(f, s);
  out.geometry = grid;
  return out;
}

Transform compose(const Transform& outer, const Transform& inner, const Geometry& grid) {
  if (outer.is_affine() && inner.is_affine()) return Transform(inner.affine() * outer.affine());

  if (outer.is_affine()) {
    // u(x) = A x + u_inner(A x) - x
    kernels::SampleSpec s;
    s.target = kernels::grid_of(grid);
    s.target_index_to_world = grid.index_to_world();
    s.post = outer.affine();
    DisplacementField out = sample_field(inner.field(), s);
    out.geometry = grid;
    const DisplacementField a = affine_field(outer.affine(), grid);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.x[i] += a.x[i];
      out.y[i] += a.y[i];
      out.z[i] += a.z[i];
    }
    return Transform(std::move(out));
  }

  const DisplacementField uo = to_field(outer, grid);
  DisplacementField out;
  if (inner.is_affine()) {
    // u(x) = A (x + u_o) - x
    out = DisplacementField(grid);
    const AffineMap& a = inner.affine();
    const AffineMap i2w = grid.index_to_world();
    const auto [nx, ny, nz] = grid.dims;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const std::size_t idx = grid.index(i, j, k);
          const Vec3 x = i2w.apply({double(i), double(j), double(k)});
          const Vec3 d = a.apply(x + uo.at(idx)) - x;
          out.x[idx] = float(d[0]);
          out.y[idx] = float(d[1]);
          out.z[idx] = float(d[2]);
        }
    return Transform(std::move(out));
  }

  // u(x) = u_o(x) + u_i(x + u_o(x))
  kernels::SampleSpec s;
  s.target = kernels::grid_of(grid);
  s.target_index_to_world = grid.index_to_world();
  s.displacement = uo.channels();
  out = sample_field(inner.field(), s);
  out.geometry = grid;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.x[i] += uo.x[i];
    out.y[i] += uo.y[i];
    out.z[i] += uo.z[i];
  }
  return Transform(std::move(out));
}

Transform compose(const Transform& outer, const Transform& inner) {
  if (outer.is_affine()) {
    if (!inner.is_affine())
      throw Error(ErrorCode::GeometryMismatch, "affine-then-dense composition needs an explicit output grid");
    return Transform(inner.affine() * outer.affine());
  }
  return compose(outer, inner, outer.field().geometry);
}

int squaring_steps_for(const DisplacementField& velocity, int min_steps) {
  const double min_spacing =
      std::min({velocity.geometry.spacing[0], velocity.geometry.spacing[1], velocity.geometry.spacing[2]});
  const double vox = velocity.max_norm() / min_spacing;
  int steps = std::max(min_steps, 0);
  while (vox / std::ldexp(1.0, steps) > 0.5 && steps < 30) ++steps;
  return steps;
}

DisplacementField exponentiate(const DisplacementField& velocity, int steps) {
  DisplacementField u = velocity.scaled(std::ldexp(1.0, -steps));
  for (int s = 0; s < steps; ++s) {
    const Transform t(std::move(u));
    u = compose(t, t, t.field().geometry).field();
  }
  return u;
}

Diffeo Diffeo::from_velocity(DisplacementField velocity, int min_steps) {
  velocity.check_finite();
  Diffeo d;
  d.squaring_steps = squaring_steps_for(velocity, std::max(min_steps, 4));
  d.forward = exponentiate(velocity, d.squaring_steps);
  d.inverse = exponentiate(velocity.scaled(-1.0), d.squaring_steps);
  d.velocity = std::move(velocity);
  return d;
}

Diffeo Diffeo::identity(const Geometry& g) { return from_velocity(DisplacementField(g)); }

InverseResidual inverse_consistency(const DisplacementField& forward, const DisplacementField& inverse) {
  const auto r = compose(Transform(forward), Transform(inverse), forward.geometry).field();
  const Mat3 to_index = forward.geometry.world_to_index().linear;
  InverseResidual out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = norm(mul(to_index, r.at(i)));
    out.mean += d;
    out.max = std::max(out.max, d);
  }
  out.mean /= double(std::max<std::size_t>(1, r.size()));
  return out;
}

}  // namespace vqa
