#pragma once

#include <array>
#include <cstdint>

#include "vqa/components.hpp"
#include "vqa/linalg.hpp"
#include "vqa/volume.hpp"

namespace vqa {

struct SegmenterConfig {
  double dark_threshold = 0.58;  // fraction of the median brain intensity
  int min_component_voxels = 5;
  double binarize_level = 0.5;
  Connectivity connectivity = Connectivity::TwentySix;
  int border_erosion = 2;  // voxels peeled off the brain mask before thresholding
  // Run prediction on a fixed-size grid (z padded first) and map the
  // probability map back with linear interpolation.
  bool resize_for_network = false;
  std::array<int, 3> network_dims{256, 256, 32};

  void validate() const;
};

/// voxel >= level -> 1.
Mask binarize(const Volume& p, double level);

/// Drops components with fewer than `min_voxels` voxels.
Mask remove_small_components(const Mask& m, int min_voxels, Connectivity connectivity = Connectivity::TwentySix);

/// Erosion with the 6-neighbourhood; voxels outside the grid count as background.
Mask erode(const Mask& m, int iterations);

/// Anything that maps a FLAIR image and brain mask to a ventricle probability map.
class VentricleSegmenter {
 public:
  virtual ~VentricleSegmenter() = default;
  virtual Volume predict(const Volume& flair, const Mask& brain) const = 0;
};

/// Dark voxels inside the eroded brain mask. Probabilities are 0 or 1.
class RuleBasedSegmenter final : public VentricleSegmenter {
 public:
  explicit RuleBasedSegmenter(SegmenterConfig cfg = {});
  Volume predict(const Volume& flair, const Mask& brain) const override;

 private:
  SegmenterConfig cfg_;
};

/// Binarize + small-component removal.
Mask postprocess(const Volume& probability, const SegmenterConfig& cfg);

/// Prediction plus post-processing, through the fixed-size grid when
/// cfg.resize_for_network is set.
Mask segment_ventricles(const VentricleSegmenter& seg, const Volume& flair, const Mask& brain,
                        const SegmenterConfig& cfg);

/// Reference segmenter: brain voxels darker than dark_threshold * median,
/// away from the brain border, with small components removed.
Mask rule_based_ventricle_segment(const Volume& flair, const Mask& brain, const SegmenterConfig& cfg = {});

struct AugmentParams {
  double max_translation = 50;  // voxels
  double max_rotation = 0.2;    // radians, per axis
  double coronal_flip_prob = 0.5;
  double ventricle_boost_max = 0;  // 2 mu
  double dark_perturb_max = 0;     // offsets drawn from [-2 mu, 2 mu]
  double dark_cutoff = 0.25;
  std::uint64_t seed = 0;

  /// Defaults with the intensity terms set from the mean normalized intensity mu.
  static AugmentParams from_mean_intensity(double mu, std::uint64_t seed);
  void validate() const;
};

struct AugmentDraw {
  double ventricle_boost = 0;
  double dark_offset = 0;
  Vec3 translation{0, 0, 0};  // voxels
  Vec3 rotation{0, 0, 0};     // radians about x, y, z
  bool flip = false;
};

struct Augmented {
  Volume image;
  Mask ventricles;
  AugmentDraw draw;
};

/// Intensity terms first (ventricle boost, then the dark-region offset on
/// non-ventricle voxels below dark_cutoff), then one rigid motion about the
/// grid centre applied to the image (linear) and the mask (nearest). The
/// coronal flip mirrors the anterior-posterior (y) axis. Samples falling
/// outside the grid are zero.
Augmented augment(const Volume& image, const Mask& ventricles, const AugmentParams& p);

}  // namespace vqa
