#include <cmath>

#include "register/pyramid.hpp"
#include "vqa/register.hpp"

namespace vqa {

void RegParams::validate() const {
  if (pyramid_levels < 1) throw Error(ErrorCode::InvalidArgument, "pyramid_levels must be >= 1");
  if (int(iters_per_level.size()) != pyramid_levels)
    throw Error(ErrorCode::InvalidArgument, "iters_per_level needs one entry per pyramid level");
  for (int it : iters_per_level)
    if (it < 0) throw Error(ErrorCode::InvalidArgument, "iteration counts must be non-negative");
  if (!(update_step > 0) || !(fluid_sigma >= 0) || !(diffusion_sigma >= 0) || affine_iters < 0 ||
      !(affine_lr > 0) || !(convergence_tol > 0))
    throw Error(ErrorCode::InvalidArgument, "registration parameters must be positive");
}

namespace {

struct AffineLevel {
  Volume fixed;
  Volume moving;
  std::array<Volume, 3> moving_grad;  // world units
  AffineMap index_to_coords;          // fixed index -> (x - c) / R
};

AffineLevel make_level(const Volume& moving, const Volume& fixed, int factor, const Vec3& centre, double radius) {
  AffineLevel lv{detail::downsample(fixed, factor), detail::downsample(moving, factor), {}, {}};
  const auto& mg = lv.moving.geometry();
  std::array<Volume, 3> gidx{Volume(mg), Volume(mg), Volume(mg)};
  kernels::gradient(lv.moving.data(), kernels::grid_of(mg),
                    {gidx[0].data().data(), gidx[1].data().data(), gidx[2].data().data()});
  // d/dy = (world_to_index)^T d/dc
  const Mat3 w2i = mg.world_to_index().linear;
  for (auto& g : lv.moving_grad) g = Volume(mg);
  for (std::size_t i = 0; i < lv.moving.size(); ++i)
    for (int a = 0; a < 3; ++a)
      lv.moving_grad[a][i] =
          float(w2i[a] * gidx[0][i] + w2i[3 + a] * gidx[1][i] + w2i[6 + a] * gidx[2][i]);
  AffineMap to_world = lv.fixed.geometry().index_to_world();
  AffineMap norm_map;
  norm_map.linear = {1 / radius, 0, 0, 0, 1 / radius, 0, 0, 0, 1 / radius};
  norm_map.offset = (-1.0 / radius) * centre;
  lv.index_to_coords = norm_map * to_world;
  return lv;
}

// theta = (M row-major, tau); y = c + (I + M)(x - c) + R tau
AffineMap to_affine(const std::array<double, 12>& theta, const Vec3& c, double radius) {
  AffineMap a;
  for (int i = 0; i < 9; ++i) a.linear[i] = kIdentity3[i] + theta[i];
  const Vec3 t{radius * theta[9], radius * theta[10], radius * theta[11]};
  a.offset = c - mul(a.linear, c) + t;
  return a;
}

struct Eval {
  double energy = 0;
  std::array<double, 12> grad{};
};

Eval evaluate(const AffineLevel& lv, const AffineMap& a, double radius) {
  const auto& fg = lv.fixed.geometry();
  kernels::SampleSpec s;
  s.target = kernels::grid_of(fg);
  s.source = kernels::grid_of(lv.moving.geometry());
  s.target_index_to_world = fg.index_to_world();
  s.world_to_source_index = lv.moving.geometry().world_to_index();
  s.post = a;
  std::array<Volume, 4> out{Volume(fg), Volume(fg), Volume(fg), Volume(fg)};
  const float* src[] = {lv.moving.data().data(), lv.moving_grad[0].data().data(), lv.moving_grad[1].data().data(),
                        lv.moving_grad[2].data().data()};
  float* dst[] = {out[0].data().data(), out[1].data().data(), out[2].data().data(), out[3].data().data()};
  kernels::sample(s, src, dst);
  const auto m = kernels::affine_moments(lv.fixed.data(), out[0].data(),
                                         {out[1].data().data(), out[2].data().data(), out[3].data().data()},
                                         lv.index_to_coords, s.target);
  const double n = double(fg.voxel_count());
  Eval e;
  e.energy = m.ssd / n;
  for (int i = 0; i < 12; ++i) e.grad[i] = 2.0 * radius * m.grad[i] / n;
  return e;
}

double grad_norm(const std::array<double, 12>& g) {
  double s = 0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace

AffineResult register_affine(const Volume& moving, const Volume& fixed, const RegParams& p) {
  p.validate();
  const auto& fg = fixed.geometry();
  const Vec3 centre = fg.to_world({0.5 * (fg.dims[0] - 1), 0.5 * (fg.dims[1] - 1), 0.5 * (fg.dims[2] - 1)});
  double radius = 0;
  for (int a = 0; a < 3; ++a) radius = std::max(radius, 0.5 * fg.dims[a] * fg.spacing[a]);

  std::array<double, 12> theta{};
  AffineResult result;
  bool first_level = true;
  for (int factor : detail::pyramid_factors(p.pyramid_levels)) {
    const AffineLevel lv = make_level(moving, fixed, factor, centre, radius);
    Eval cur = evaluate(lv, to_affine(theta, centre, radius), radius);
    if (first_level) result.initial_msd = cur.energy;
    first_level = false;

    double lr = p.affine_lr;
    int stalls = 0;
    bool settled = false;
    for (int it = 0; it < p.affine_iters; ++it) {
      ++result.iterations;
      const double gn = grad_norm(cur.grad);
      if (cur.energy == 0.0) {
        settled = true;
        break;
      }
      if (gn < 1e-12) break;
      std::array<double, 12> trial = theta;
      for (int i = 0; i < 12; ++i) trial[i] -= lr * cur.grad[i] / gn;
      const Eval next = evaluate(lv, to_affine(trial, centre, radius), radius);
      if (next.energy < cur.energy) {
        const double rel = (cur.energy - next.energy) / std::max(cur.energy, 1e-300);
        stalls = rel < p.convergence_tol ? stalls + 1 : 0;
        theta = trial;
        cur = next;
        lr *= 1.2;
        if (stalls >= 5) {
          settled = true;
          break;
        }
      } else {
        lr *= 0.5;
        if (lr < 1e-4 * p.affine_lr) {
          settled = true;
          break;
        }
      }
    }
    result.converged = settled;
    result.final_msd = cur.energy;
  }
  result.transform = to_affine(theta, centre, radius);
  return result;
}

}  // namespace vqa
