#include <omp.h>

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "generators.hpp"
#include "vqa/kernels.hpp"

using namespace vqa;
namespace k = vqa::kernels;

namespace {

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct Field {
  std::vector<float> x, y, z;
  explicit Field(std::size_t n) : x(n), y(n), z(n) {}
  k::Field3 ptr() { return {x.data(), y.data(), z.data()}; }
  k::ConstField3 cptr() const { return {x.data(), y.data(), z.data()}; }
  bool operator==(const Field& o) const { return bit_equal(x, o.x) && bit_equal(y, o.y) && bit_equal(z, o.z); }
};

std::vector<float> random_values(Rng& rng, std::size_t n, double lo = 0, double hi = 1) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(lo, hi));
  return v;
}

/// Runs the check under several thread counts so reduction order is exercised.
template <class F>
void for_thread_counts(F f) {
  const int saved = omp_get_max_threads();
  for (int t : {1, 2, 3, 7}) {
    omp_set_num_threads(t);
    f();
  }
  omp_set_num_threads(saved);
}

}  // namespace

TEST_CASE("gaussian smoothing: serial and OpenMP agree bitwise") {
  Rng rng(1);
  const k::Grid g{13, 9, 11};
  const auto in = random_values(rng, g.size());
  std::vector<float> ref(g.size());
  k::serial::gaussian_smooth(in, ref, g, {1.5, 0.0, 2.5});
  for_thread_counts([&] {
    std::vector<float> out(g.size());
    k::omp::gaussian_smooth(in, out, g, {1.5, 0.0, 2.5});
    CHECK(bit_equal(ref, out));
  });
  // constant input stays constant and mass is preserved for interior impulses
  std::vector<float> c(g.size(), 0.5f), cs(g.size());
  k::serial::gaussian_smooth(c, cs, g, {2, 2, 2});
  for (float x : cs) CHECK(x == doctest::Approx(0.5f).epsilon(1e-6));
  // sigma <= 0 on every axis copies
  std::vector<float> cp(g.size());
  k::serial::gaussian_smooth(in, cp, g, {0, 0, 0});
  CHECK(bit_equal(in, cp));
}

TEST_CASE("sampling: serial and OpenMP agree bitwise") {
  Rng rng(2);
  const k::Grid src{10, 12, 8}, dst{9, 7, 11};
  const auto a = random_values(rng, src.size()), b = random_values(rng, src.size());
  Field disp(dst.size());
  disp.x = random_values(rng, dst.size(), -2, 2);
  disp.y = random_values(rng, dst.size(), -2, 2);
  disp.z = random_values(rng, dst.size(), -2, 2);
  for (auto interp : {k::Interp::Linear, k::Interp::Nearest})
    for (auto boundary : {k::Boundary::Clamp, k::Boundary::Zero}) {
      k::SampleSpec s;
      s.target = dst;
      s.source = src;
      s.target_index_to_world.linear = {1.1, 0.1, 0, 0, 0.9, 0, 0.05, 0, 1.2};
      s.displacement = disp.cptr();
      s.interp = interp;
      s.boundary = boundary;
      const float* in[] = {a.data(), b.data()};
      std::vector<float> r0(dst.size()), r1(dst.size());
      float* out_ref[] = {r0.data(), r1.data()};
      k::serial::sample(s, in, out_ref);
      for_thread_counts([&] {
        std::vector<float> o0(dst.size()), o1(dst.size());
        float* out[] = {o0.data(), o1.data()};
        k::omp::sample(s, in, out);
        CHECK(bit_equal(r0, o0));
        CHECK(bit_equal(r1, o1));
      });
    }
}

TEST_CASE("trilinear sampling matches a hand evaluation") {
  const k::Grid g{2, 2, 2};
  const std::vector<float> v{0, 1, 2, 3, 4, 5, 6, 7};  // v = x + 2y + 4z
  k::SampleSpec s;
  s.target = {1, 1, 1};
  s.source = g;
  s.target_index_to_world.offset = {0.25, 0.6, 0.75};
  const float* in[] = {v.data()};
  float r = 0;
  float* out[] = {&r};
  k::serial::sample(s, in, out);
  CHECK(r == doctest::Approx(0.25 + 1.2 + 3.0));
  s.interp = k::Interp::Nearest;
  k::serial::sample(s, in, out);
  CHECK(r == 6.0f);
  s.interp = k::Interp::Linear;
  s.boundary = k::Boundary::Zero;
  s.target_index_to_world.offset = {5, 0.6, 0.75};
  k::serial::sample(s, in, out);
  CHECK(r == 0.0f);
  s.boundary = k::Boundary::Clamp;
  k::serial::sample(s, in, out);
  CHECK(r == doctest::Approx(1.0 + 1.2 + 3.0));
}

TEST_CASE("gradient: serial and OpenMP agree bitwise, central differences") {
  Rng rng(3);
  const k::Grid g{8, 6, 5};
  const auto in = random_values(rng, g.size());
  Field ref(g.size());
  k::serial::gradient(in, g, ref.ptr());
  for_thread_counts([&] {
    Field out(g.size());
    k::omp::gradient(in, g, out.ptr());
    CHECK(out == ref);
  });
  std::vector<float> ramp(g.size());
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) ramp[std::size_t(x + g.nx * (y + g.ny * z))] = float(3 * x - y + 0.5 * z);
  Field d(g.size());
  k::serial::gradient(ramp, g, d.ptr());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(d.x[i] == doctest::Approx(3.0));
    CHECK(d.y[i] == doctest::Approx(-1.0));
    CHECK(d.z[i] == doctest::Approx(0.5));
  }
}

TEST_CASE("reductions: serial and OpenMP agree bitwise") {
  Rng rng(4);
  const k::Grid g{17, 11, 13};
  std::vector<std::uint8_t> ma(g.size()), mb(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ma[i] = rng.uniform() < 0.3;
    mb[i] = rng.uniform() < 0.4;
  }
  const auto c = k::serial::confusion(ma, mb, g);
  CHECK(c.tp + c.fp + c.fn + c.tn == g.size());
  const auto a = random_values(rng, g.size()), b = random_values(rng, g.size());
  const auto pm = k::serial::pair_moments(a, b, g);
  Field ga(g.size());
  k::serial::gradient(a, g, ga.ptr());
  Field gb(g.size());
  k::serial::gradient(b, g, gb.ptr());
  AffineMap coords;
  coords.linear = {0.1, 0, 0, 0, 0.1, 0, 0, 0, 0.1};
  coords.offset = {-0.5, -0.5, -0.5};
  const auto am = k::serial::affine_moments(a, b, gb.cptr(), coords, g);
  Field du_ref(g.size());
  const double ssd_ref = k::serial::demons_update(a, b, ga.cptr(), gb.cptr(), 1.0, g, du_ref.ptr());

  for_thread_counts([&] {
    const auto co = k::omp::confusion(ma, mb, g);
    CHECK(co.tp == c.tp);
    CHECK(co.fp == c.fp);
    CHECK(co.fn == c.fn);
    CHECK(co.tn == c.tn);
    const auto po = k::omp::pair_moments(a, b, g);
    CHECK(bit_equal(po.sab, pm.sab));
    CHECK(bit_equal(po.saa, pm.saa));
    CHECK(bit_equal(po.sa, pm.sa));
    const auto ao = k::omp::affine_moments(a, b, gb.cptr(), coords, g);
    CHECK(bit_equal(ao.ssd, am.ssd));
    for (int i = 0; i < 12; ++i) CHECK(bit_equal(ao.grad[std::size_t(i)], am.grad[std::size_t(i)]));
    Field du(g.size());
    const double ssd = k::omp::demons_update(a, b, ga.cptr(), gb.cptr(), 1.0, g, du.ptr());
    CHECK(bit_equal(ssd, ssd_ref));
    CHECK(du == du_ref);
  });
}

TEST_CASE("demons update formula") {
  const k::Grid g{1, 1, 1};
  const std::vector<float> f{0.2f}, w{0.5f};
  Field gf(1), gw(1), du(1);
  gf.x = {1.0f};
  gw.x = {0.0f};
  gf.y = gw.y = gf.z = gw.z = {0.0f};
  const double ssd = k::serial::demons_update(f, w, gf.cptr(), gw.cptr(), 2.0, g, du.ptr());
  // g = 0.5, diff = 0.3: -2 * 0.3 * 0.5 / (0.25 + 0.09)
  CHECK(du.x[0] == doctest::Approx(-2 * 0.3 * 0.5 / (0.25 + 0.09)).epsilon(1e-6));
  CHECK(du.y[0] == 0.0f);
  CHECK(ssd == doctest::Approx(0.09).epsilon(1e-6));
  // flat region with equal intensities gives no update
  const std::vector<float> same{0.5f};
  Field zero(1);
  k::serial::demons_update(same, same, zero.cptr(), zero.cptr(), 1.0, g, du.ptr());
  CHECK(du.x[0] == 0.0f);
}
