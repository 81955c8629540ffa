#include <algorithm>
#include <cmath>
#include <utility>

#include "register/pyramid.hpp"
#include "vqa/intensity.hpp"
#include "vqa/register.hpp"

namespace vqa {

namespace {

using kernels::Grid;

// Velocity and displacement fields in voxel units of one pyramid level.
struct IndexField {
  Grid grid;
  std::vector<float> c[3];

  explicit IndexField(Grid g) : grid(g) {
    for (auto& ch : c) ch.assign(g.size(), 0.0f);
  }
  kernels::Field3 channels() { return {c[0].data(), c[1].data(), c[2].data()}; }
  kernels::ConstField3 channels() const { return {c[0].data(), c[1].data(), c[2].data()}; }
  double max_norm() const {
    double m = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      m = std::max(m, double(c[0][i]) * c[0][i] + double(c[1][i]) * c[1][i] + double(c[2][i]) * c[2][i]);
    return std::sqrt(m);
  }
};

// Samples `channels` at x + u(x), all in index space of the same grid.
void sample_displaced(const IndexField& u, std::span<const float* const> src, std::span<float* const> dst,
                      kernels::Interp interp = kernels::Interp::Linear) {
  kernels::SampleSpec s;
  s.target = u.grid;
  s.source = u.grid;
  s.displacement = u.channels();
  s.interp = interp;
  kernels::sample(s, src, dst);
}

IndexField exp_index(const IndexField& v, int min_steps) {
  int steps = std::max(min_steps, 0);
  const double vmax = v.max_norm();
  while (vmax / std::ldexp(1.0, steps) > 0.5 && steps < 30) ++steps;
  const float scale = float(std::ldexp(1.0, -steps));
  IndexField u(v.grid);
  for (int a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < v.grid.size(); ++i) u.c[a][i] = scale * v.c[a][i];
  IndexField tmp(v.grid);
  for (int s = 0; s < steps; ++s) {
    const float* src[] = {u.c[0].data(), u.c[1].data(), u.c[2].data()};
    float* dst[] = {tmp.c[0].data(), tmp.c[1].data(), tmp.c[2].data()};
    sample_displaced(u, src, dst);
    for (int a = 0; a < 3; ++a)
      for (std::size_t i = 0; i < v.grid.size(); ++i) tmp.c[a][i] += u.c[a][i];
    std::swap(u, tmp);
  }
  return u;
}

IndexField negated(const IndexField& v) {
  IndexField out(v.grid);
  for (int a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < v.grid.size(); ++i) out.c[a][i] = -v.c[a][i];
  return out;
}

void smooth_field(IndexField& f, double sigma) {
  if (sigma <= 0) return;
  for (auto& ch : f.c) kernels::gaussian_smooth(ch, ch, f.grid, {sigma, sigma, sigma});
}

double pearson(const kernels::PairMoments& m) {
  const double va = m.saa - m.sa * m.sa / m.n;
  const double vb = m.sbb - m.sb * m.sb / m.n;
  if (va <= 0 || vb <= 0) return 0.0;
  return (m.sab - m.sa * m.sb / m.n) / std::sqrt(va * vb);
}

// Coarse velocity resampled onto a finer grid, rescaled to the finer voxel size.
IndexField upsample(const IndexField& coarse, Grid fine) {
  IndexField out(fine);
  const std::array<int, 3> cd{coarse.grid.nx, coarse.grid.ny, coarse.grid.nz};
  const std::array<int, 3> fd{fine.nx, fine.ny, fine.nz};
  kernels::SampleSpec s;
  s.target = fine;
  s.source = coarse.grid;
  for (int a = 0; a < 3; ++a) {
    const double ratio = double(cd[a]) / double(fd[a]);
    s.target_index_to_world.linear[4 * a] = ratio;
    s.target_index_to_world.offset[a] = 0.5 * ratio - 0.5;
  }
  const float* src[] = {coarse.c[0].data(), coarse.c[1].data(), coarse.c[2].data()};
  float* dst[] = {out.c[0].data(), out.c[1].data(), out.c[2].data()};
  kernels::sample(s, src, dst);
  for (int a = 0; a < 3; ++a) {
    const float scale = float(double(fd[a]) / double(cd[a]));
    for (auto& x : out.c[a]) x *= scale;
  }
  return out;
}

constexpr int kInnerSquaringSteps = 4;
constexpr int kStallIterations = 5;

}  // namespace

double cc_similarity(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::DimMismatch, "cc_similarity needs equal dims");
  const Volume ra = minmax_rescale(a), rb = minmax_rescale(b);
  const auto m = kernels::pair_moments(ra.data(), rb.data(), kernels::grid_of(a.geometry()));
  const double va = m.saa - m.sa * m.sa / m.n;
  const double vb = m.sbb - m.sb * m.sb / m.n;
  if (va <= 0 || vb <= 0) throw Error(ErrorCode::DegenerateIntensityRange, "zero variance");
  return std::clamp((m.sab - m.sa * m.sb / m.n) / std::sqrt(va * vb), -1.0, 1.0);
}

DiffeoResult register_diffeo(const Volume& moving, const Volume& fixed, const RegParams& p) {
  p.validate();
  if (!same_grid(moving.geometry(), fixed.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "demons expects moving resampled onto the fixed grid");

  DiffeoResult result;
  result.initial_cc = cc_similarity(moving, fixed);

  const auto factors = detail::pyramid_factors(p.pyramid_levels);
  IndexField v(Grid{});
  IndexField best(Grid{});
  double best_cc = -2;
  for (std::size_t level = 0; level < factors.size(); ++level) {
    const bool finest = level + 1 == factors.size();
    const Volume f = detail::downsample(fixed, factors[level]);
    const Volume m = detail::downsample(moving, factors[level]);
    const Grid g = kernels::grid_of(f.geometry());
    v = level == 0 ? IndexField(g) : upsample(v, g);

    // Symmetric forces: the moving image pulled onto the fixed frame by exp(v)
    // and the fixed image pulled back by exp(-v) both drive the update.
    IndexField grad_f(g), grad_m(g), grad_w(g), grad_b(g), du(g), du_b(g);
    kernels::gradient(f.data(), g, grad_f.channels());
    kernels::gradient(m.data(), g, grad_m.channels());
    std::vector<float> warped(g.size()), warped_back(g.size());

    double prev_cc = 0;
    int stalls = 0;
    bool level_converged = false;
    const int iters = p.iters_per_level[level];
    for (int it = 0; it <= iters; ++it) {
      const IndexField u = exp_index(v, kInnerSquaringSteps);
      {
        const float* src[] = {m.data().data()};
        float* dst[] = {warped.data()};
        sample_displaced(u, src, dst);
      }
      const double cc = pearson(kernels::pair_moments(warped, f.data(), g));
      if (finest && cc > best_cc) {
        best_cc = cc;
        best = v;
      }
      if (it == iters) break;
      if (it > 0 && std::abs(cc - prev_cc) <= p.convergence_tol * std::max(std::abs(prev_cc), 1e-12)) {
        if (++stalls >= kStallIterations) {
          level_converged = true;
          break;
        }
      } else {
        stalls = 0;
      }
      prev_cc = cc;
      ++result.iterations;

      const IndexField ub = exp_index(negated(v), kInnerSquaringSteps);
      {
        const float* src[] = {f.data().data()};
        float* dst[] = {warped_back.data()};
        sample_displaced(ub, src, dst);
      }
      kernels::gradient(warped, g, grad_w.channels());
      kernels::gradient(warped_back, g, grad_b.channels());
      kernels::demons_update(f.data(), warped, std::as_const(grad_f).channels(), std::as_const(grad_w).channels(),
                             p.update_step, g, du.channels());
      kernels::demons_update(m.data(), warped_back, std::as_const(grad_m).channels(), std::as_const(grad_b).channels(),
                             p.update_step, g, du_b.channels());
      for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < g.size(); ++i) du.c[a][i] = 0.5f * (du.c[a][i] - du_b.c[a][i]);
      smooth_field(du, p.fluid_sigma);
      for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < g.size(); ++i) v.c[a][i] += du.c[a][i];
      smooth_field(v, p.diffusion_sigma);
    }
    if (finest) result.converged = level_converged || iters == 0;
  }

  // voxel units -> world mm on the fixed grid
  const auto& geom = fixed.geometry();
  const Mat3 lin = geom.index_to_world().linear;
  DisplacementField vel(geom);
  for (std::size_t i = 0; i < vel.size(); ++i) {
    const Vec3 w = mul(lin, Vec3{best.c[0][i], best.c[1][i], best.c[2][i]});
    vel.x[i] = float(w[0]);
    vel.y[i] = float(w[1]);
    vel.z[i] = float(w[2]);
  }
  vel.check_finite();
  result.diffeo = Diffeo::from_velocity(std::move(vel));
  result.final_cc = cc_similarity(warp(moving, result.diffeo.forward_transform(), InterpMode::Linear), fixed);
  if (result.final_cc < result.initial_cc) {
    result.diffeo = Diffeo::identity(geom);
    result.final_cc = result.initial_cc;
    result.converged = false;
  }
  return result;
}

Registration register_images(const Volume& moving, const Volume& fixed, const RegParams& p) {
  const Volume mr = robust_rescale(moving);
  const Volume fr = robust_rescale(fixed);
  Registration r;
  r.cc_before = cc_similarity(warp(mr, Transform::identity(), fixed.geometry(), InterpMode::Linear), fr);

  const AffineResult aff = register_affine(mr, fr, p);
  if (!aff.converged) r.warnings.push_back("affine: NonConvergence");
  r.affine = aff.transform;

  const Volume moved = warp(mr, Transform(aff.transform), fixed.geometry(), InterpMode::Linear);
  DiffeoResult dr = register_diffeo(moved, fr, p);
  if (!dr.converged) r.warnings.push_back("diffeo: NonConvergence");
  r.diffeo = std::move(dr.diffeo);

  r.forward = compose(r.diffeo.forward_transform(), Transform(aff.transform), fixed.geometry());
  r.inverse = compose(Transform(aff.transform.inverse()), r.diffeo.inverse_transform(), moving.geometry());
  r.cc_after = cc_similarity(warp(mr, r.forward, InterpMode::Linear), fr);
  return r;
}

Registration identity_registration(const Geometry& fixed, const Geometry& moving) {
  Registration r;
  r.diffeo = Diffeo::identity(fixed);
  r.forward = Transform(DisplacementField(fixed));
  r.inverse = Transform(DisplacementField(moving));
  return r;
}

}  // namespace vqa
