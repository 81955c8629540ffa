#include "doctest.h"
#include "generators.hpp"
#include "vqa/phantom.hpp"
#include "vqa/wmhmap.hpp"

using namespace vqa;

TEST_CASE("threshold semantics") {
  CHECK(passes_threshold(0.0, 0.0));
  CHECK(passes_threshold(0.6, 0.0));
  CHECK_FALSE(passes_threshold(0.6, 0.6));
  CHECK(passes_threshold(0.61, 0.6));
  CHECK_FALSE(passes_threshold(-0.1, 0.0));
}

TEST_CASE("burden map counts and averages") {
  const Geometry g = centered_grid({3, 1, 1}, 1.0);
  const Mask a(g, std::vector<std::uint8_t>{1, 1, 0});
  const Mask b(g, std::vector<std::uint8_t>{1, 0, 0});
  const Mask c(g, std::vector<std::uint8_t>{0, 0, 1});
  const std::vector<BurdenEntry> e{{a, 0.95}, {b, 0.7}, {c, 0.5}};
  const BurdenMap m = build_burden_map(e, 0.6);
  CHECK(m.n_included == 2);
  CHECK(m.n_total == 3);
  CHECK(m.threshold == 0.6);
  CHECK(m.map.values() == std::vector<float>{1.0f, 0.5f, 0.0f});
  CHECK(m.flags.empty());

  const BurdenMap all = build_burden_map(e, 0.0);
  CHECK(all.n_included == 3);

  const BurdenMap none = build_burden_map(e, 0.99);
  CHECK(none.n_included == 0);
  REQUIRE(none.flags.size() == 1);
  CHECK(none.flags[0] == "NoSubjectsPass");
  for (float x : none.map.data()) CHECK(x == 0.0f);

  CHECK_THROWS_WITH_AS(build_burden_map(std::vector<BurdenEntry>{}, 0.5), doctest::Contains("EmptyList"), Error);
  CHECK(build_burden_map(std::vector<BurdenEntry>{}, 0.5, g).n_included == 0);
  CHECK_THROWS_AS(build_burden_map(e, 1.5), Error);
  const std::vector<BurdenEntry> wrong{{a, 1.0}, {Mask(centered_grid({4, 1, 1}, 1.0)), 1.0}};
  CHECK_THROWS_WITH_AS(build_burden_map(wrong, 0.0), doctest::Contains("GeometryMismatch"), Error);
}

TEST_CASE("burden map properties on random entries") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const Geometry g = gen::cube(6);
    std::vector<BurdenEntry> e;
    const int n = 1 + rng.uniform_int(12);
    for (int i = 0; i < n; ++i) e.push_back({gen::random_mask(rng, g, rng.uniform(0, 0.4)), rng.uniform()});
    int prev = n + 1;
    for (double T : {0.0, 0.3, 0.6, 0.9}) {
      const BurdenMap m = build_burden_map(e, T);
      CHECK(m.n_included <= prev);
      prev = m.n_included;
      // direct mean over the included entries
      for (std::size_t v = 0; v < m.map.size(); ++v) {
        double s = 0;
        bool witness = false;
        for (const auto& x : e)
          if (passes_threshold(x.quality, T)) {
            s += x.wmh[v];
            witness = witness || x.wmh[v];
          }
        const double expect = m.n_included ? s / m.n_included : 0.0;
        REQUIRE(m.map[v] == doctest::Approx(expect).epsilon(1e-6));
        REQUIRE(m.map[v] >= 0.0f);
        REQUIRE(m.map[v] <= 1.0f);
        if (m.map[v] > 0) REQUIRE(witness);
      }
    }
  }
}

TEST_CASE("map error") {
  const Geometry g = gen::cube(4);
  BurdenMap m;
  m.map = Volume(g, 0.0f);
  CHECK(map_error(m, Volume(g, 0.0f)) == 0.0);
  CHECK(map_error(m, Volume(g, 1.0f)) == 1.0);
  CHECK_THROWS_AS(map_error(m, Volume(gen::cube(5))), Error);
}

TEST_CASE("lesion warping") {
  Rng rng(3);
  const Geometry g = gen::cube(10, 2.0);
  const Mask w = gen::random_blobs(rng, g, 4);
  CHECK(warp_wmh(w, Transform(DisplacementField(g)), g) == w);
  CHECK(count(warp_wmh(Mask(g), Transform(DisplacementField(g)), g)) == 0);
  MarResult r;
  r.final_transform = Transform(DisplacementField(g));
  CHECK(warp_wmh(w, r) == w);
  CHECK_THROWS_WITH_AS(warp_wmh(w, Transform(DisplacementField(g)), gen::cube(8, 2.0)),
                       doctest::Contains("GeometryMismatch"), Error);
}

TEST_CASE("phantom lesion lands near its general-space origin") {
  PhantomSpec base;
  base.dims = {32, 32, 32};
  base.spacing = 4.0;
  const AtlasSet s = make_atlas_set(2, base);
  const auto cohort = make_cohort(4, s, 9);
  const Mask truth = cohort_wmh_general(s, 9, CohortOptions{}.wmh_load);
  const Geometry& gg = s.general().image.geometry();
  for (const auto& sub : cohort) {
    const Atlas& a = s.by_id(*sub.generator_atlas);
    // true subject -> general map: atlas-to-general, then the inverse deformation
    const Transform to_g = compose(a.to_general, sub.true_deformation->inverse_transform(), gg);
    const Mask warped = warp_wmh(sub.wmh, to_g, gg);
    REQUIRE(count(warped) > 0);
    const Vec3 c1 = centroid_world(warped), c2 = centroid_world(mask_and(truth, warp(*a.brain, a.to_general, gg)));
    CHECK(norm(c1 - c2) / gg.spacing[0] <= 2.0);
  }
}
