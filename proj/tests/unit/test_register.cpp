#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "vqa/intensity.hpp"
#include "vqa/metrics.hpp"
#include "vqa/phantom.hpp"
#include "vqa/register.hpp"
#include "vqa/transform_io.hpp"

using namespace vqa;

namespace {

DisplacementField constant_field(const Geometry& g, Vec3 u) {
  DisplacementField f(g);
  std::fill(f.x.begin(), f.x.end(), float(u[0]));
  std::fill(f.y.begin(), f.y.end(), float(u[1]));
  std::fill(f.z.begin(), f.z.end(), float(u[2]));
  return f;
}

AffineMap translation(Vec3 t) {
  AffineMap a;
  a.offset = t;
  return a;
}

double max_abs_diff(const DisplacementField& a, const DisplacementField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max({m, std::abs(double(a.x[i]) - b.x[i]), std::abs(double(a.y[i]) - b.y[i]),
                  std::abs(double(a.z[i]) - b.z[i])});
  return m;
}

/// Smooth blob image so that linear interpolation is well behaved.
Volume smooth_image(const Geometry& g) {
  Volume v(g);
  const auto d = g.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 p = g.to_world({double(i), double(j), double(k)});
        v(i, j, k) = float(std::exp(-(p[0] * p[0] + 2 * p[1] * p[1] + 0.5 * p[2] * p[2]) / 400.0) +
                           0.3 * std::sin(p[0] / 8.0));
      }
  return v;
}

PhantomSubject native_phantom(double age) {
  PhantomSpec s;
  s.noise_sigma = 0;
  s.age_param = age;
  return make_phantom(s);
}

PhantomSubject coarse_phantom(double age) {
  PhantomSpec s;
  s.dims = {32, 32, 32};
  s.spacing = 4.0;
  s.noise_sigma = 0;
  s.age_param = age;
  return make_phantom(s);
}

}  // namespace

TEST_CASE("warp with a zero field is the identity") {
  Rng rng(1);
  const Geometry g = gen::cube(6, 2.0);
  const Volume v = gen::random_volume(rng, g);
  const Volume w = warp(v, Transform(DisplacementField(g)), InterpMode::Linear);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(w[i] == doctest::Approx(v[i]).epsilon(1e-6));
  const Mask m = gen::random_mask(rng, g);
  CHECK(warp(m, Transform::identity()) == m);
}

TEST_CASE("pull-back convention by single-voxel probe") {
  const Geometry g = gen::cube(10, 2.0);
  Volume delta(g, 0.0f);
  delta(6, 4, 4) = 1.0f;
  // displacement of +2 voxels along x: output(x) = input(x + u)
  const Volume w = warp(delta, Transform(constant_field(g, {4.0, 0, 0})), InterpMode::Linear);
  CHECK(w(4, 4, 4) == doctest::Approx(1.0));
  CHECK(w(6, 4, 4) == doctest::Approx(0.0));
  double total = 0;
  for (float x : w.data()) total += x;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("warp keeps masks binary and linear values in range") {
  Rng rng(2);
  const Geometry g = gen::cube(12, 2.0);
  const Diffeo d = random_svf(5, 6.0, 3.0, g);
  const Mask m = gen::random_blobs(rng, g, 10);
  CHECK(is_binary(warp(m, d.forward_transform())));
  const Volume v = gen::random_volume(rng, g, -1, 2);
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  const Volume w = warp(v, d.forward_transform(), InterpMode::Linear);
  for (float x : w.data()) {
    CHECK(x >= *lo);
    CHECK(x <= *hi);
  }
  CHECK_THROWS_WITH_AS(warp(v, d.forward_transform(), gen::cube(8, 2.0), InterpMode::Linear),
                       doctest::Contains("GeometryMismatch"), Error);
}

TEST_CASE("composition rules") {
  const Geometry g = gen::cube(8, 2.0);
  const Transform t(constant_field(g, {1.5, -2, 0.5}));
  const Transform id{DisplacementField(g)};
  CHECK(max_abs_diff(compose(id, t).field(), t.field()) <= 1e-6);
  CHECK(max_abs_diff(compose(t, id).field(), t.field()) <= 1e-6);

  // two translations add
  const Transform s(constant_field(g, {-0.5, 1, 2}));
  CHECK(max_abs_diff(compose(t, s).field(), constant_field(g, {1.0, -1, 2.5})) <= 1e-6);

  // affine pairs compose exactly
  const AffineMap a{rotation_xyz(0.1, 0.0, -0.2), {1, 2, 3}};
  const AffineMap b{rotation_xyz(0.0, 0.3, 0.1), {-2, 0, 1}};
  const Transform ab = compose(Transform(a), Transform(b));
  REQUIRE(ab.is_affine());
  const Vec3 x{3, -1, 4};
  const Vec3 expect = b.apply(a.apply(x));
  for (int i = 0; i < 3; ++i) CHECK(ab.map(x)[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(compose(Transform(a), t), doctest::Contains("GeometryMismatch"), Error);
  const Transform mixed = compose(Transform(translation({2, 0, 0})), t, g);
  CHECK(max_abs_diff(mixed.field(), constant_field(g, {3.5, -2, 0.5})) <= 1e-6);
}

TEST_CASE("composition matches sequential warping") {
  const Geometry g = gen::cube(24, 2.0);
  const Diffeo d1 = random_svf(11, 4.0, 4.0, g), d2 = random_svf(12, 4.0, 4.0, g);
  const Volume v = smooth_image(g);
  const Volume once = warp(v, compose(d1.forward_transform(), d2.forward_transform()), InterpMode::Linear);
  const Volume twice =
      warp(warp(v, d2.forward_transform(), InterpMode::Linear), d1.forward_transform(), InterpMode::Linear);
  double err = 0;
  for (int k = 4; k < 20; ++k)
    for (int j = 4; j < 20; ++j)
      for (int i = 4; i < 20; ++i) err = std::max(err, double(std::abs(once(i, j, k) - twice(i, j, k))));
  CHECK(err < 0.05);
}

TEST_CASE("scaling and squaring") {
  const Geometry g = gen::cube(16, 2.0);
  const DisplacementField zero(g);
  const Diffeo id = Diffeo::from_velocity(zero);
  CHECK(id.forward.max_norm() == 0.0);
  CHECK(id.squaring_steps >= 4);

  // constant velocity exponentiates to the same translation
  const Diffeo t = Diffeo::from_velocity(constant_field(g, {3, 0, -1}));
  CHECK(max_abs_diff(t.forward, constant_field(g, {3, 0, -1})) <= 1e-5);
  CHECK(max_abs_diff(t.inverse, constant_field(g, {-3, 0, 1})) <= 1e-5);

  CHECK(squaring_steps_for(constant_field(g, {200, 0, 0}), 4) > 4);

  DisplacementField bad(g);
  bad.x[3] = std::nanf("");
  CHECK_THROWS_WITH_AS(bad.check_finite(), doctest::Contains("NonFiniteField"), Error);
  CHECK_THROWS_AS(Diffeo::from_velocity(bad), Error);
}

TEST_CASE("random smooth fields are invertible") {
  const Geometry g = centered_grid({64, 64, 64}, 2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Diffeo d = random_svf(seed, 8.0, 4.0, g);
    CHECK(d.forward.max_norm() <= 8.0 + 1e-9);
    const InverseResidual r = inverse_consistency(d.forward, d.inverse);
    CHECK(r.mean <= 0.5);
    CHECK(r.max <= 2.0);
  }
}

TEST_CASE("cross-correlation similarity") {
  Rng rng(4);
  const Geometry g = gen::cube(8);
  const Volume a = gen::random_volume(rng, g), b = gen::random_volume(rng, g);
  CHECK(cc_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-9));
  Volume inv(g);
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 1.0f - a[i];
  CHECK(cc_similarity(a, inv) == doctest::Approx(-1.0).epsilon(1e-9));

  // direct covariance formula on the min-max rescaled values
  const Volume ra = minmax_rescale(a), rb = minmax_rescale(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(a.size());
  mb /= double(a.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  CHECK(cc_similarity(a, b) == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-10));
  CHECK_THROWS_AS(cc_similarity(a, Volume(g, 1.0f)), Error);
}

TEST_CASE("registration parameter validation") {
  RegParams p;
  CHECK_NOTHROW(p.validate());
  p.iters_per_level = {10, 10};
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.fluid_sigma = -1;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.affine_lr = -1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("affine registration") {
  const PhantomSubject p = coarse_phantom(0.5);
  const Volume fixed = minmax_rescale(p.flair);
  const RegParams params;

  const AffineResult same = register_affine(fixed, fixed, params);
  for (int i = 0; i < 9; ++i) CHECK(same.transform.linear[i] == doctest::Approx(kIdentity3[i]).epsilon(1e-3));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(same.transform.offset[i]) <= 1e-3);

  // moving shifted by +3 voxels in x: the pull-back maps fixed points 3 voxels along +x
  const double shift = 3 * 4.0;
  const Volume moving = warp(fixed, Transform(translation({-shift, 0, 0})), InterpMode::Linear);
  const Mask moving_vent = warp(p.ventricles, Transform(translation({-shift, 0, 0})), p.ventricles.geometry());
  const AffineResult r = register_affine(moving, fixed, params);
  CHECK(std::abs(r.transform.offset[0] - shift) <= 0.5 * 4.0);
  CHECK(r.final_msd < r.initial_msd);
  const Mask back = warp(moving_vent, Transform(r.transform), p.ventricles.geometry());
  CHECK(dice(confusion(p.ventricles, back)) >= 0.95);

  const Volume c1(fixed.geometry(), 0.2f), c2(fixed.geometry(), 0.7f);
  const AffineResult flat = register_affine(c1, c2, params);
  CHECK_FALSE(flat.converged);
  CHECK(flat.transform == AffineMap{});
}

TEST_CASE("diffeomorphic registration") {
  const PhantomSubject p = coarse_phantom(0.5);
  const Volume fixed = minmax_rescale(p.flair);
  RegParams params;

  const DiffeoResult same = register_diffeo(fixed, fixed, params);
  CHECK(same.diffeo.velocity.max_norm() <= 0.1 * 4.0);

  const Diffeo truth = random_svf(3, 8.0, 4.0, fixed.geometry());
  const Volume moving = warp(fixed, truth.inverse_transform(), InterpMode::Linear);
  const DiffeoResult r = register_diffeo(moving, fixed, params);
  CHECK(r.final_cc >= r.initial_cc - 1e-6);
  CHECK(r.final_cc > r.initial_cc);
  const InverseResidual ic = inverse_consistency(r.diffeo.forward, r.diffeo.inverse);
  CHECK(ic.mean <= 0.5);

  CHECK_THROWS_WITH_AS(register_diffeo(minmax_rescale(coarse_phantom(0.5).flair), fixed, [] {
    RegParams bad;
    bad.update_step = 0;
    return bad;
  }()),
                       doctest::Contains("InvalidArgument"), Error);
}

TEST_CASE("full registration is deterministic and never degrades") {
  const PhantomSubject a = native_phantom(0.3), b = native_phantom(0.7);
  const Registration r1 = register_images(a.flair, b.flair, RegParams{});
  const Registration r2 = register_images(a.flair, b.flair, RegParams{});
  CHECK(r1.forward.field() == r2.forward.field());
  CHECK(r1.inverse.field() == r2.inverse.field());
  CHECK(r1.cc_after >= r1.cc_before - 1e-6);
  CHECK(r1.forward.field().geometry == b.flair.geometry());
  CHECK(r1.inverse.field().geometry == a.flair.geometry());

  // ventricles of b pulled into a's frame overlap a's ventricles better than without registration
  const double before = dice(confusion(a.ventricles, b.ventricles));
  const double after = dice(confusion(a.ventricles, warp(b.ventricles, r1.inverse)));
  CHECK(after > before);

  const Registration id = identity_registration(b.flair.geometry(), a.flair.geometry());
  CHECK(id.forward.field().max_norm() == 0.0);
}

TEST_CASE("transform pair persistence") {
  const auto dir = gen::temp_dir("xfm");
  const Geometry g = gen::cube(10, 2.0);
  const Diffeo d = random_svf(8, 5.0, 3.0, g);
  TransformPair t{d.forward_transform(), d.inverse_transform(), {{"note", "x"}}};
  write_transform_pair(t, dir, "p", g, g);
  for (const char* s : {"_fx", "_fy", "_fz", "_ix", "_iy", "_iz"})
    CHECK(std::filesystem::exists(dir / (std::string("p") + s + ".nii")));
  CHECK(std::filesystem::exists(dir / "p.json"));
  const TransformPair back = read_transform_pair(dir, "p");
  CHECK(back.forward.field() == d.forward);
  CHECK(back.inverse.field() == d.inverse);
  CHECK(back.meta["note"] == "x");

  // affine members are densified on the requested grids
  const AffineMap a = translation({1, 2, 3});
  write_transform_pair({Transform(a), Transform(a.inverse())}, dir, "a", g, gen::cube(6, 2.0));
  const TransformPair ra = read_transform_pair(dir, "a");
  CHECK(ra.inverse.field().geometry.dims == std::array<int, 3>{6, 6, 6});
  CHECK(ra.forward.field().x[17] == doctest::Approx(1.0));

  CHECK(affine_from_json(to_json(AffineMap{rotation_xyz(0.1, 0.2, 0.3), {1, 2, 3}})) ==
        AffineMap{rotation_xyz(0.1, 0.2, 0.3), {1, 2, 3}});
  CHECK_THROWS_AS(read_transform_pair(dir, "missing"), Error);
}
