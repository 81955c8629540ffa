#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <zlib.h>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "vqa/components.hpp"
#include "vqa/intensity.hpp"
#include "vqa/nifti.hpp"
#include "vqa/resample.hpp"

using namespace vqa;

namespace {

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void put_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

template <class T>
T get(const std::vector<unsigned char>& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof v);
  return v;
}

template <class T>
void set(std::vector<unsigned char>& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof v);
}

Volume ramp(const Geometry& g) {
  Volume v(g);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i);
  return v;
}

}  // namespace

TEST_CASE("geometry invariants") {
  Geometry g = centered_grid({4, 5, 6}, 2.0);
  CHECK(g.voxel_count() == 120);
  const Vec3 c = g.to_world({1.5, 2.0, 2.5});
  CHECK(c[0] == doctest::Approx(0.0));
  CHECK(c[1] == doctest::Approx(0.0));
  CHECK(c[2] == doctest::Approx(0.0));
  const Vec3 back = g.to_index(g.to_world({3, 1, 4}));
  CHECK(back[0] == doctest::Approx(3));
  CHECK(back[2] == doctest::Approx(4));

  Geometry bad = g;
  bad.spacing[1] = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = g;
  bad.direction[0] = 2;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = g;
  bad.dims[2] = 0;
  CHECK_THROWS_AS(bad.validate(), Error);

  CHECK_THROWS_AS(Volume(g, std::vector<float>(7)), Error);
}

TEST_CASE("mask helpers") {
  Geometry g = centered_grid({3, 1, 1}, 1);
  Mask a(g, std::vector<std::uint8_t>{1, 1, 0});
  Mask b(g, std::vector<std::uint8_t>{0, 1, 1});
  CHECK(count(mask_and(a, b)) == 1);
  CHECK(count(mask_or(a, b)) == 3);
  CHECK(count(mask_minus(a, b)) == 1);
  CHECK(is_subset(mask_and(a, b), a));
  CHECK_FALSE(is_subset(a, b));
  Volume v(g, std::vector<float>{0.49f, 0.5f, 0.51f});
  CHECK(to_mask(v).values() == std::vector<std::uint8_t>{0, 1, 1});
  CHECK(centroid_world(Mask(g, std::vector<std::uint8_t>{1, 0, 1}))[0] == doctest::Approx(0.0));
}

TEST_CASE("nifti round trip is exact for every datatype") {
  const auto dir = gen::temp_dir("nifti_rt");
  Rng rng(3);
  Geometry g = centered_grid({5, 4, 3}, 1.5);
  g.origin = {-3.25, 7.5, 12.0};

  Volume f = gen::random_volume(rng, g, -100, 100);
  write_nifti(f, dir / "f.nii");
  const Volume rf = read_nifti(dir / "f.nii");
  CHECK(rf == f);

  Volume u8(g), i16(g);
  for (std::size_t i = 0; i < u8.size(); ++i) {
    u8[i] = float(rng.uniform_int(256));
    i16[i] = float(rng.uniform_int(65536) - 32768);
  }
  write_nifti(u8, dir / "u8.nii", NiftiDatatype::UInt8);
  write_nifti(i16, dir / "i16.nii", NiftiDatatype::Int16);
  CHECK(read_nifti(dir / "u8.nii") == u8);
  CHECK(read_nifti(dir / "i16.nii") == i16);

  Mask m = gen::random_mask(rng, g, 0.3);
  write_nifti_mask(m, dir / "m.nii");
  CHECK(read_nifti_mask(dir / "m.nii") == m);

  // oblique direction survives within float precision
  Geometry ob = g;
  ob.direction = rotation_xyz(0.1, -0.2, 0.3);
  Volume o(ob, 1.0f);
  write_nifti(o, dir / "o.nii");
  const Volume ro = read_nifti(dir / "o.nii");
  CHECK(same_grid(ro.geometry(), ob, 1e-5));
}

TEST_CASE("nifti header layout") {
  const auto dir = gen::temp_dir("nifti_hdr");
  Volume v(centered_grid({2, 2, 2}, 1.0));
  write_nifti(v, dir / "z.nii");
  const auto b = file_bytes(dir / "z.nii");
  CHECK(b.size() == 348 + 32);
  CHECK(get<std::int32_t>(b, 0) == 348);
  CHECK(std::memcmp(b.data() + 344, "n+1\0", 4) == 0);
  CHECK(get<std::int16_t>(b, 70) == 16);
  CHECK(get<std::int16_t>(b, 42) == 2);
  for (int i = 1; i <= 3; ++i) CHECK(get<float>(b, 76 + 4 * i) == 1.0f);
  CHECK(get<std::int16_t>(b, 254) >= 1);  // sform_code
}

TEST_CASE("nifti reader applies scaling and rejects bad files") {
  const auto dir = gen::temp_dir("nifti_bad");
  Geometry g = centered_grid({2, 2, 2}, 1.0);
  Volume v(g, 3.0f);
  write_nifti(v, dir / "v.nii", NiftiDatatype::Int16);
  auto b = file_bytes(dir / "v.nii");

  auto scaled = b;
  set<float>(scaled, 112, 2.0f);
  set<float>(scaled, 116, 1.0f);
  put_bytes(dir / "s.nii", scaled);
  const Volume s = read_nifti(dir / "s.nii");
  for (float x : s.data()) CHECK(x == 7.0f);

  auto magic = b;
  std::memcpy(magic.data() + 344, "ni1\0", 4);
  put_bytes(dir / "m.nii", magic);
  CHECK_THROWS_WITH_AS(read_nifti(dir / "m.nii"), doctest::Contains("BadMagic"), Error);

  auto dtype = b;
  set<std::int16_t>(dtype, 70, 64);
  put_bytes(dir / "d.nii", dtype);
  CHECK_THROWS_WITH_AS(read_nifti(dir / "d.nii"), doctest::Contains("UnsupportedDatatype"), Error);

  auto big = b;
  set<std::int16_t>(big, 42, 5000);
  put_bytes(dir / "b.nii", big);
  CHECK_THROWS_WITH_AS(read_nifti(dir / "b.nii"), doctest::Contains("DimOverflow"), Error);

  auto cut = b;
  cut.resize(348 + 5);
  put_bytes(dir / "t.nii", cut);
  CHECK_THROWS_WITH_AS(read_nifti(dir / "t.nii"), doctest::Contains("TruncatedFile"), Error);

  CHECK_THROWS_WITH_AS(read_nifti(dir / "missing.nii"), doctest::Contains("IoFailure"), Error);
  CHECK_THROWS_AS(write_nifti(Volume(g, 0.5f), dir / "x.nii", NiftiDatatype::UInt8), Error);
  CHECK_THROWS_WITH_AS(write_nifti(v, dir / "no_such_dir" / "x.nii"), doctest::Contains("IoFailure"), Error);
}

TEST_CASE("nifti reader accepts gzip") {
  const auto dir = gen::temp_dir("nifti_gz");
  Rng rng(5);
  Volume v = gen::random_volume(rng, centered_grid({6, 5, 4}, 2.0));
  write_nifti(v, dir / "v.nii");
  const auto raw = file_bytes(dir / "v.nii");
  gzFile gz = gzopen((dir / "v.nii.gz").c_str(), "wb");
  REQUIRE(gz);
  gzwrite(gz, raw.data(), unsigned(raw.size()));
  gzclose(gz);
  CHECK(read_nifti(dir / "v.nii.gz") == v);
}

TEST_CASE("percentile normalization uses nearest rank") {
  Volume v(centered_grid({10, 10, 10}, 1.0));
  std::vector<float> vals(1000);
  std::iota(vals.begin(), vals.end(), 0.0f);
  Rng rng(1);
  for (std::size_t i = vals.size() - 1; i > 0; --i) std::swap(vals[i], vals[std::size_t(rng.uniform_int(int(i + 1)))]);
  std::copy(vals.begin(), vals.end(), v.data().begin());

  auto sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const float p1 = sorted[std::size_t(std::ceil(0.01 * 1000)) - 1];
  const float p99 = sorted[std::size_t(std::ceil(0.99 * 1000)) - 1];
  CHECK(p1 == 9.0f);
  CHECK(p99 == 989.0f);
  CHECK(percentile_nearest_rank(v.data(), 0.01) == p1);

  const Volume n = percentile_normalize(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == p1) CHECK(n[i] == 0.0f);
    if (v[i] == p99) CHECK(n[i] == 1.0f);
    CHECK(n[i] == doctest::Approx((v[i] - p1) / (p99 - p1)).epsilon(1e-6));
  }
  // no clipping
  CHECK(*std::min_element(n.data().begin(), n.data().end()) < 0.0f);
  CHECK(*std::max_element(n.data().begin(), n.data().end()) > 1.0f);

  const Volume n2 = percentile_normalize(n);
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(n2[i] == doctest::Approx(n[i]).epsilon(1e-6));

  CHECK_THROWS_WITH_AS(percentile_normalize(Volume(v.geometry(), 2.0f)), doctest::Contains("DegenerateIntensityRange"),
                       Error);
}

TEST_CASE("minmax rescale") {
  Geometry g = centered_grid({3, 1, 1}, 1.0);
  const Volume r = minmax_rescale(Volume(g, std::vector<float>{2, 4, 6}));
  CHECK(r.values() == std::vector<float>{0.0f, 0.5f, 1.0f});
  CHECK(minmax_rescale(r) == r);
  CHECK_THROWS_AS(minmax_rescale(Volume(g, 1.0f)), Error);
}

TEST_CASE("robust rescale") {
  const Geometry g = gen::cube(10);
  Volume clean(g);
  for (std::size_t i = 0; i < clean.size(); ++i) clean[i] = i % 10 < 6 ? 0.0f : (i % 10 == 9 ? 0.1f : 0.6f);
  const Volume r = robust_rescale(clean);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(r[i] == doctest::Approx(clean[i] / 0.6).epsilon(1e-6));

  // affine in the input intensities cancels
  Volume shifted(g);
  for (std::size_t i = 0; i < clean.size(); ++i) shifted[i] = 3.0f * clean[i] - 7.0f;
  const Volume rs = robust_rescale(shifted);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(rs[i] == doctest::Approx(r[i]).epsilon(1e-5));

  // a few bright outliers leave the scale alone, unlike min-max
  Volume spiked = clean;
  for (std::size_t i = 0; i < 5; ++i) spiked[i * 100 + 7] = 5.0f;
  const Volume rp = robust_rescale(spiked);
  CHECK(rp[6] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(minmax_rescale(spiked)[6] < 0.2f);

  CHECK_THROWS_WITH_AS(robust_rescale(Volume(g, 2.0f)), doctest::Contains("DegenerateIntensityRange"), Error);
}

TEST_CASE("resample identity, constants and trilinear oracle") {
  Rng rng(8);
  Geometry g = centered_grid({5, 6, 7}, 1.0);
  const Volume v = gen::random_volume(rng, g);
  const Volume same = resample(v, g.dims, InterpMode::Linear);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(same[i] == doctest::Approx(v[i]).epsilon(1e-6));

  const Volume c = resample(Volume(g, 0.25f), {9, 3, 11}, InterpMode::Linear);
  for (float x : c.data()) CHECK(x == doctest::Approx(0.25f).epsilon(1e-6));

  // 4x4x4 ramp along x halved: output voxel i samples source x = 2i + 0.5
  Geometry g4 = centered_grid({4, 4, 4}, 1.0);
  Volume rx(g4);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) rx(i, j, k) = float(10 * i);
  const Volume d = resample(rx, {2, 4, 4}, InterpMode::Linear);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 2; ++i) {
        const double x = (i + 0.5) * 2.0 - 0.5;
        const int x0 = int(std::floor(x));
        const double t = x - x0;
        const double expect = (1 - t) * rx(x0, j, k) + t * rx(std::min(x0 + 1, 3), j, k);
        CHECK(d(i, j, k) == doctest::Approx(expect).epsilon(1e-6));
      }
  CHECK(d.geometry().spacing[0] == doctest::Approx(2.0));
  // physical extent preserved
  const double lo_src = g4.to_world({-0.5, 0, 0})[0];
  const double lo_dst = d.geometry().to_world({-0.5, 0, 0})[0];
  CHECK(lo_src == doctest::Approx(lo_dst));
}

TEST_CASE("resample stays within the input range") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Geometry g = centered_grid({3 + rng.uniform_int(6), 3 + rng.uniform_int(6), 3 + rng.uniform_int(6)}, 1.0);
    const Volume v = gen::random_volume(rng, g, -2, 3);
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const Volume r = resample(v, {2 + rng.uniform_int(12), 2 + rng.uniform_int(12), 2 + rng.uniform_int(12)},
                              trial % 2 ? InterpMode::Linear : InterpMode::Nearest);
    for (float x : r.data()) {
      CHECK(x >= *lo);
      CHECK(x <= *hi);
    }
  }
  Mask m(centered_grid({4, 4, 4}, 1.0), 1);
  CHECK(is_binary(resample(m, {7, 3, 9})));
  CHECK_THROWS_AS(resample(Volume(centered_grid({2, 2, 2}, 1.0)), {0, 2, 2}, InterpMode::Linear), Error);
}

TEST_CASE("clinical-size resize keeps the extent") {
  Geometry g = centered_grid({64, 64, 30}, 2.0);
  Volume v(g, 1.0f);
  const Volume r = resample(pad_slices(v, 32), {256, 256, 32}, InterpMode::Linear);
  CHECK(r.dims() == std::array<int, 3>{256, 256, 32});
  CHECK(r.geometry().spacing[0] == doctest::Approx(0.5));
}

TEST_CASE("pad and crop slices") {
  Rng rng(4);
  Geometry g = centered_grid({8, 8, 30}, 1.0);
  const Volume v = gen::random_volume(rng, g, 0.5, 1.0);
  const Volume p = pad_slices(v, 32);
  CHECK(p.dims()[2] == 32);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      CHECK(p(i, j, 0) == 0.0f);
      CHECK(p(i, j, 31) == 0.0f);
      CHECK(p(i, j, 1) == v(i, j, 0));
    }
  const Vec3 w0 = g.to_world({0, 0, 0});
  const Vec3 w1 = p.geometry().to_world({0, 0, 1});
  for (int a = 0; a < 3; ++a) CHECK(w0[a] == doctest::Approx(w1[a]));

  const Volume p3 = pad_slices(v, 33);  // odd extra slice on top
  for (int i = 0; i < 8; ++i) {
    CHECK(p3(i, 0, 1) == v(i, 0, 0));
    CHECK(p3(i, 0, 32) == 0.0f);
    CHECK(p3(i, 0, 31) == 0.0f);
  }
  CHECK(pad_slices(v, 30) == v);
  CHECK(crop_slices(p, 1, 30) == v);
  CHECK_THROWS_WITH_AS(pad_slices(v, 29), doctest::Contains("TargetSmallerThanSource"), Error);
}

TEST_CASE("resample_to follows world coordinates") {
  Geometry g = centered_grid({6, 6, 6}, 1.0);
  const Volume v = ramp(g);
  const Volume same = resample_to(v, g, InterpMode::Nearest);
  CHECK(same == v);
  Geometry shifted = g;
  shifted.origin[0] += 1.0;
  const Volume s = resample_to(v, shifted, InterpMode::Linear);
  CHECK(s(0, 2, 3) == v(1, 2, 3));
}

TEST_CASE("connected components basics") {
  Geometry g = centered_grid({2, 2, 2}, 1.0);
  Mask face(g);
  face(0, 0, 0) = face(1, 0, 0) = 1;
  CHECK(connected_components(face, Connectivity::Six).count() == 1);
  Mask corner(g);
  corner(0, 0, 0) = corner(1, 1, 1) = 1;
  CHECK(connected_components(corner, Connectivity::Six).count() == 2);
  CHECK(connected_components(corner, Connectivity::TwentySix).count() == 1);
  CHECK(connected_components(Mask(g), Connectivity::Six).count() == 0);
  CHECK(connectivity_from_int(6) == Connectivity::Six);
  CHECK_THROWS_AS(connectivity_from_int(18), Error);
}

TEST_CASE("connected components match flood fill and partition the foreground") {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const Geometry g = gen::cube(8);
    const Mask m = gen::random_mask(rng, g, rng.uniform(0.05, 0.5));
    for (int conn : {6, 26}) {
      const Components c = connected_components(m, connectivity_from_int(conn));
      int n = 0;
      const auto ref = oracle::flood_fill(m, conn, &n);
      REQUIRE(int(c.count()) == n);
      // same partition up to labels, and labels ordered by first voxel
      std::vector<int> map(std::size_t(n) + 1, 0);
      int last_label = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        REQUIRE((c.labels[i] == 0) == (m[i] == 0));
        if (!m[i]) continue;
        if (map[std::size_t(ref[i])] == 0) {
          map[std::size_t(ref[i])] = c.labels[i];
          REQUIRE(c.labels[i] == last_label + 1);
          last_label = c.labels[i];
        }
        REQUIRE(map[std::size_t(ref[i])] == c.labels[i]);
      }
      std::size_t covered = 0;
      std::vector<char> seen(m.size(), 0);
      for (const auto& r : c.regions())
        for (std::size_t idx : r) {
          REQUIRE(!seen[idx]);
          seen[idx] = 1;
          ++covered;
        }
      REQUIRE(covered == count(m));
    }
  }
}

TEST_CASE("masked statistics") {
  Geometry g = centered_grid({4, 1, 1}, 1.0);
  Volume v(g, std::vector<float>{1, 2, 3, 10});
  Mask m(g, std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(masked_mean(v, m) == doctest::Approx(2.0));
  CHECK(masked_median(v, m) == doctest::Approx(2.0));
  Mask even(g, std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK(masked_median(v, even) == doctest::Approx(2.0));
}
