#include "vqa/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vqa/error.hpp"
#include "vqa/kernels.hpp"
#include "vqa/rng.hpp"

namespace vqa {

namespace {

enum class Label : std::uint8_t { Background, Tissue, DeepGray, Ventricle };

double sq(double v) { return v * v; }

bool in_ellipsoid(const Vec3& p, const Vec3& c, const Vec3& r) {
  return sq((p[0] - c[0]) / r[0]) + sq((p[1] - c[1]) / r[1]) + sq((p[2] - c[2]) / r[2]) <= 1.0;
}

// World coordinates in mm: x left-right, y anterior-posterior, z inferior-superior.
bool in_lateral_ventricle(const Vec3& p, double a) {
  const double half_len = 18 + 10 * a;
  const double t = p[1] / half_len;
  if (std::fabs(t) > 1) return false;
  const double taper = 1 - 0.45 * t * t;
  const double rx = (3.5 + 4.5 * a) * taper;
  const double rz = (5.5 + 5.5 * a) * taper;
  const double zc = 2 + 7 * (1 - t * t);
  const double xc = 4 + rx;
  return sq((std::fabs(p[0]) - xc) / rx) + sq((p[2] - zc) / rz) <= 1.0;
}

bool in_third_ventricle(const Vec3& p, double a) {
  return std::fabs(p[0]) <= 1.5 + 0.5 * a && p[1] >= -8 && p[1] <= 6 && p[2] >= -16 && p[2] <= -6;
}

bool in_fourth_ventricle(const Vec3& p, double a) {
  return in_ellipsoid(p, {0, 24, -24}, {3.5 + 2 * a, 3 + 1.5 * a, 3.5 + 2 * a});
}

Label label_at(const Vec3& p, double a) {
  if (!in_ellipsoid(p, {0, 0, 0}, {50, 56, 44})) return Label::Background;
  if (in_lateral_ventricle(p, a) || in_third_ventricle(p, a) || in_fourth_ventricle(p, a)) return Label::Ventricle;
  if (in_ellipsoid(p, {15, 2, -8}, {6, 9, 5}) || in_ellipsoid(p, {-15, 2, -8}, {6, 9, 5})) return Label::DeepGray;
  return Label::Tissue;
}

float intensity_of(Label l) {
  switch (l) {
    case Label::Tissue: return kTissueIntensity;
    case Label::DeepGray: return kDeepGrayIntensity;
    case Label::Ventricle: return kVentricleIntensity;
    default: return 0.0f;
  }
}

void add_noise(Volume& v, double sigma, std::uint64_t seed) {
  if (sigma <= 0) return;
  Rng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(v[i] + sigma * rng.normal());
}

void check_unit(double v, const char* name) {
  if (!(v >= 0 && v <= 1)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must lie in [0, 1]");
}

const Atlas& atlas_for_band(const AtlasSet& s, AgeBand band) {
  for (const auto& a : s.atlases)
    if (a.age_band == band) return a;
  throw Error(ErrorCode::InvalidArgument, "atlas set lacks band " + std::string(to_string(band)));
}

}  // namespace

void PhantomSpec::validate() const {
  for (int d : dims)
    if (d < 8) throw Error(ErrorCode::InvalidArgument, "phantom dims must be at least 8");
  if (!(spacing > 0)) throw Error(ErrorCode::InvalidArgument, "phantom spacing must be positive");
  check_unit(age_param, "age_param");
  check_unit(wmh_load, "wmh_load");
  if (!(noise_sigma >= 0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be non-negative");
}

PhantomSubject render_anatomy(const Geometry& grid, double age_param) {
  check_unit(age_param, "age_param");
  PhantomSubject s;
  s.age_param = age_param;
  s.flair = Volume(grid);
  s.brain = Mask(grid);
  s.ventricles = Mask(grid);
  s.wmh = Mask(grid);
  const auto [nx, ny, nz] = grid.dims;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        const Label l = label_at(grid.to_world({double(i), double(j), double(k)}), age_param);
        s.flair[idx] = intensity_of(l);
        s.brain[idx] = l != Label::Background;
        s.ventricles[idx] = l == Label::Ventricle;
      }
  return s;
}

Mask wmh_blobs(const Mask& brain, const Mask& ventricles, double load, std::uint64_t seed) {
  check_unit(load, "wmh_load");
  const Geometry& g = brain.geometry();
  Mask out(g);
  std::vector<std::size_t> vox;
  for (std::size_t i = 0; i < ventricles.size(); ++i)
    if (ventricles[i]) vox.push_back(i);
  const int n_blobs = static_cast<int>(std::lround(16 * load));
  if (vox.empty() || n_blobs == 0) return out;

  Rng rng(seed);
  const auto [nx, ny, nz] = g.dims;
  auto inside = [&](int i, int j, int k) { return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz; };
  for (int b = 0; b < n_blobs; ++b) {
    const std::size_t start = vox[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(vox.size())))];
    double ci = double(start % nx), cj = double((start / nx) % ny), ck = double(start / (std::size_t(nx) * ny));
    // A random direction mostly within the axial plane.
    const double phi = rng.uniform(0, 2 * std::numbers::pi);
    const double elev = rng.uniform(-0.4, 0.4);
    const Vec3 dir{std::cos(phi) * std::cos(elev), std::sin(phi) * std::cos(elev), std::sin(elev)};
    const double gap = rng.uniform(1.5, 3.0);
    const double radius = rng.uniform(2.0, 3.5);
    // March out of the ventricle, then past the gap.
    for (int step = 0; step < 4 * std::max({nx, ny, nz}); ++step) {
      const int i = int(std::lround(ci)), j = int(std::lround(cj)), k = int(std::lround(ck));
      if (!inside(i, j, k) || !ventricles(i, j, k)) break;
      ci += 0.5 * dir[0];
      cj += 0.5 * dir[1];
      ck += 0.5 * dir[2];
    }
    ci += (gap + radius) * dir[0];
    cj += (gap + radius) * dir[1];
    ck += (gap + radius) * dir[2];
    const int r = int(std::ceil(radius));
    for (int dk = -r; dk <= r; ++dk)
      for (int dj = -r; dj <= r; ++dj)
        for (int di = -r; di <= r; ++di) {
          const int i = int(std::lround(ci)) + di, j = int(std::lround(cj)) + dj, k = int(std::lround(ck)) + dk;
          if (!inside(i, j, k)) continue;
          const double d2 = sq(i - ci) + sq(j - cj) + sq(k - ck);
          if (d2 <= radius * radius && brain(i, j, k) && !ventricles(i, j, k)) out(i, j, k) = 1;
        }
  }
  return out;
}

PhantomSubject make_phantom(const PhantomSpec& spec) {
  spec.validate();
  PhantomSubject s = render_anatomy(centered_grid(spec.dims, spec.spacing), spec.age_param);
  s.wmh = wmh_blobs(s.brain, s.ventricles, spec.wmh_load, derive_seed(spec.seed, 1));
  for (std::size_t i = 0; i < s.wmh.size(); ++i)
    if (s.wmh[i]) s.flair[i] = kWmhIntensity;
  add_noise(s.flair, spec.noise_sigma, derive_seed(spec.seed, 2));
  return s;
}

RegParams atlas_build_params() {
  RegParams p;
  p.iters_per_level = {300, 200, 200};
  p.fluid_sigma = 0.5;
  p.diffusion_sigma = 0.5;
  p.update_step = 2.0;
  return p;
}

AtlasSet make_atlas_set(std::uint64_t seed, const PhantomSpec& base, const RegParams& p) {
  base.validate();
  p.validate();
  const Geometry grid = centered_grid(base.dims, base.spacing);
  constexpr AgeBand kBands[] = {AgeBand::Under70, AgeBand::From70To75, AgeBand::From75To80, AgeBand::From80To85,
                                AgeBand::Over85};
  AtlasSet s;
  std::vector<Volume> images;
  std::vector<std::uint32_t> vent_votes(grid.voxel_count(), 0), brain_votes(grid.voxel_count(), 0);
  for (std::size_t k = 0; k < kAtlasAges.size(); ++k) {
    PhantomSubject ph = render_anatomy(grid, kAtlasAges[k]);
    for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
      vent_votes[i] += ph.ventricles[i];
      brain_votes[i] += ph.brain[i];
    }
    Atlas a;
    a.id = "a" + std::to_string(k + 1);
    a.age_band = kBands[k];
    a.image = ph.flair;
    a.ventricles = std::move(ph.ventricles);
    a.brain = std::move(ph.brain);
    images.push_back(std::move(ph.flair));
    s.atlases.push_back(std::move(a));
  }
  (void)seed;  // atlases are noise-free and lesion-free

  Atlas g;
  g.id = "g";
  g.age_band = AgeBand::General;
  g.image = build_general_atlas(images);
  g.to_general = Transform::identity();
  g.from_general = Transform::identity();
  s.ventricles_general = Mask(grid);
  Mask brain(grid);
  const std::uint32_t majority = static_cast<std::uint32_t>(kAtlasAges.size() / 2 + 1);
  for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
    s.ventricles_general[i] = vent_votes[i] >= majority;
    brain[i] = brain_votes[i] >= majority;
  }
  g.ventricles = s.ventricles_general;
  g.brain = std::move(brain);

  // The age atlases are registered to the voxelwise median of the five,
  // which keeps crisp boundaries where the mean is graded.
  Volume target(grid);
  for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
    std::array<float, 5> v{};
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = images[k][i];
    std::nth_element(v.begin(), v.begin() + 2, v.end());
    target[i] = v[2];
  }
  for (auto& a : s.atlases) {
    Registration r = register_images(a.image, target, p);
    a.to_general = std::move(r.forward);
    a.from_general = std::move(r.inverse);
  }
  s.atlases.push_back(std::move(g));
  s.validate();
  return s;
}

Diffeo random_svf(std::uint64_t seed, double max_disp_mm, double smooth_sigma, const Geometry& grid) {
  if (!(max_disp_mm >= 0)) throw Error(ErrorCode::InvalidArgument, "max_disp_mm must be non-negative");
  if (!(smooth_sigma > 0)) throw Error(ErrorCode::InvalidArgument, "smooth_sigma must be positive");
  DisplacementField v(grid);
  if (max_disp_mm == 0) return Diffeo::from_velocity(std::move(v));
  // Noise is drawn on a grid padded by the kernel radius so that smoothing
  // statistics are the same at the border as in the interior.
  const int pad = static_cast<int>(std::ceil(3 * smooth_sigma));
  const auto [nx, ny, nz] = grid.dims;
  const kernels::Grid big{nx + 2 * pad, ny + 2 * pad, nz + 2 * pad};
  std::vector<float> noise(big.size());
  Rng rng(seed);
  for (auto* ch : {&v.x, &v.y, &v.z}) {
    for (auto& e : noise) e = static_cast<float>(rng.normal());
    kernels::gaussian_smooth(noise, noise, big, {smooth_sigma, smooth_sigma, smooth_sigma});
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          (*ch)[grid.index(i, j, k)] =
              noise[(std::size_t(k + pad) * big.ny + std::size_t(j + pad)) * big.nx + std::size_t(i + pad)];
  }
  const double m = v.max_norm();
  if (m == 0) return Diffeo::from_velocity(std::move(v));
  v = v.scaled(max_disp_mm / m);
  Diffeo d = Diffeo::from_velocity(v);
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double reach = std::max(d.forward.max_norm(), d.inverse.max_norm());
    if (reach <= max_disp_mm) break;
    v = v.scaled(0.99 * max_disp_mm / reach);
    d = Diffeo::from_velocity(v);
  }
  return d;
}

Mask cohort_wmh_general(const AtlasSet& s, std::uint64_t seed, double load) {
  const Atlas& g = s.general();
  if (!g.brain) throw Error(ErrorCode::InvalidArgument, "general atlas has no brain mask");
  return wmh_blobs(*g.brain, s.ventricles_general, load, derive_seed(seed, 0));
}

std::vector<PhantomSubject> make_cohort(int n, const AtlasSet& s, std::uint64_t seed, const CohortOptions& o) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "cohort size must be at least 1");
  s.validate();
  constexpr AgeBand kBands[] = {AgeBand::Under70, AgeBand::From70To75, AgeBand::From75To80, AgeBand::From80To85,
                                AgeBand::Over85};
  const Mask pattern = cohort_wmh_general(s, seed, o.wmh_load);
  Rng pick(derive_seed(seed, 1));
  std::vector<PhantomSubject> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = pick.uniform_int(5);
    const Atlas& a = atlas_for_band(s, kBands[k]);
    if (!a.ventricles || !a.brain) throw Error(ErrorCode::InvalidArgument, "cohort atlases need ventricle and brain masks");
    const Geometry& grid = a.image.geometry();
    Diffeo d = random_svf(derive_seed(seed, 1000 + std::uint64_t(i)), o.max_disp_mm, o.smooth_sigma, grid);
    const Transform fwd = d.forward_transform();

    PhantomSubject sub;
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", i + 1);
    sub.id = id;
    sub.age_param = kAtlasAges[std::size_t(k)];
    sub.flair = warp(a.image, fwd, InterpMode::Linear);
    sub.brain = warp(*a.brain, fwd);
    sub.ventricles = warp(*a.ventricles, fwd);
    const Mask lesion = warp(pattern, compose(fwd, a.from_general, grid), grid);
    sub.wmh = mask_minus(mask_and(lesion, sub.brain), sub.ventricles);
    for (std::size_t v = 0; v < sub.wmh.size(); ++v)
      if (sub.wmh[v]) sub.flair[v] = kWmhIntensity;
    add_noise(sub.flair, o.noise_sigma, derive_seed(seed, 2000 + std::uint64_t(i)));
    sub.generator_atlas = a.id;
    sub.true_deformation = std::move(d);
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace vqa
