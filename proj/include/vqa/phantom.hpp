#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqa/mar.hpp"
#include "vqa/register.hpp"
#include "vqa/transform.hpp"
#include "vqa/volume.hpp"

namespace vqa {

struct PhantomSpec {
  std::array<int, 3> dims{64, 64, 64};
  double spacing = 2.0;  // mm, isotropic
  double age_param = 0.5;
  double wmh_load = 0.3;
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr float kTissueIntensity = 0.6f;
inline constexpr float kDeepGrayIntensity = 0.5f;
inline constexpr float kVentricleIntensity = 0.1f;
inline constexpr float kWmhIntensity = 0.9f;

struct PhantomSubject {
  std::string id;
  Volume flair;
  Mask brain;
  Mask ventricles;
  Mask wmh;
  double age_param = 0;
  std::optional<std::string> generator_atlas;
  std::optional<Diffeo> true_deformation;  // pull-back from subject grid to generator atlas grid
};

/// Noise-free anatomy for one age: brain, deep gray blobs and the ventricle
/// system, all on `grid`. WMH blobs and noise are added by make_phantom.
PhantomSubject render_anatomy(const Geometry& grid, double age_param);
PhantomSubject make_phantom(const PhantomSpec& spec);

/// Periventricular blobs around `ventricles`, inside `brain`, excluding the ventricles.
Mask wmh_blobs(const Mask& brain, const Mask& ventricles, double load, std::uint64_t seed);

inline constexpr std::array<double, 5> kAtlasAges{0.1, 0.3, 0.5, 0.7, 0.9};

/// Registration settings for the offline atlas-to-general registrations.
RegParams atlas_build_params();

/// Five noise-free age atlases a1..a5, the general atlas g as their mean,
/// V_g as the majority vote of the five ventricle masks, and each age atlas
/// registered to the voxelwise median of the five (g's crisp counterpart).
AtlasSet make_atlas_set(std::uint64_t seed, const PhantomSpec& base = {}, const RegParams& p = atlas_build_params());

/// Smoothed white-noise stationary velocity on `grid`, rescaled so the
/// largest forward displacement does not exceed max_disp_mm.
Diffeo random_svf(std::uint64_t seed, double max_disp_mm, double smooth_sigma, const Geometry& grid);

struct CohortOptions {
  double max_disp_mm = 8.0;
  double smooth_sigma = 8.0;  // voxels
  double noise_sigma = 0.03;
  double wmh_load = 0.5;
};

/// Lesion pattern in general-atlas space shared by every subject of the cohort with this seed.
Mask cohort_wmh_general(const AtlasSet& s, std::uint64_t seed, double load);

/// Subjects s001..sNNN: a random age atlas deformed by a random SVF, the
/// general-space lesion pattern pulled into subject space, and noise.
std::vector<PhantomSubject> make_cohort(int n, const AtlasSet& s, std::uint64_t seed, const CohortOptions& o = {});

}  // namespace vqa
