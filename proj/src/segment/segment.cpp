#include "vqa/segment.hpp"

#include <algorithm>

#include "vqa/intensity.hpp"
#include "vqa/resample.hpp"

namespace vqa {

void SegmenterConfig::validate() const {
  if (!(dark_threshold > 0 && dark_threshold < 1)) throw Error(ErrorCode::InvalidArgument, "dark_threshold must lie in (0,1)");
  if (min_component_voxels < 1) throw Error(ErrorCode::InvalidArgument, "min_component_voxels must be >= 1");
  if (!(binarize_level > 0 && binarize_level < 1)) throw Error(ErrorCode::InvalidArgument, "binarize_level must lie in (0,1)");
  if (border_erosion < 0) throw Error(ErrorCode::InvalidArgument, "border_erosion must be >= 0");
}

Mask binarize(const Volume& p, double level) {
  Mask m(p.geometry());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = double(p[i]) >= level ? 1 : 0;
  return m;
}

Mask remove_small_components(const Mask& m, int min_voxels, Connectivity connectivity) {
  const Components cc = connected_components(m, connectivity);
  Mask out(m.geometry());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto l = cc.labels[i];
    if (l > 0 && cc.sizes[std::size_t(l - 1)] >= std::size_t(min_voxels)) out[i] = 1;
  }
  return out;
}

Mask erode(const Mask& m, int iterations) {
  Mask cur = m;
  const auto [nx, ny, nz] = m.dims();
  for (int it = 0; it < iterations; ++it) {
    Mask next(m.geometry());
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          if (!cur(i, j, k)) continue;
          const bool interior = i > 0 && j > 0 && k > 0 && i < nx - 1 && j < ny - 1 && k < nz - 1 &&
                                cur(i - 1, j, k) && cur(i + 1, j, k) && cur(i, j - 1, k) && cur(i, j + 1, k) &&
                                cur(i, j, k - 1) && cur(i, j, k + 1);
          next(i, j, k) = interior ? 1 : 0;
        }
    cur = std::move(next);
  }
  return cur;
}

RuleBasedSegmenter::RuleBasedSegmenter(SegmenterConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Volume RuleBasedSegmenter::predict(const Volume& flair, const Mask& brain) const {
  if (flair.dims() != brain.dims()) throw Error(ErrorCode::DimMismatch, "brain mask dims differ from image");
  if (count(brain) == 0) throw Error(ErrorCode::EmptyBrainMask, "brain mask is empty");
  const double threshold = cfg_.dark_threshold * masked_median(flair, brain);
  const Mask core = erode(brain, cfg_.border_erosion);
  Volume p(flair.geometry(), 0.0f);
  for (std::size_t i = 0; i < flair.size(); ++i)
    if (core[i] && double(flair[i]) < threshold) p[i] = 1.0f;
  return p;
}

Mask postprocess(const Volume& probability, const SegmenterConfig& cfg) {
  return remove_small_components(binarize(probability, cfg.binarize_level), cfg.min_component_voxels,
                                 cfg.connectivity);
}

Mask segment_ventricles(const VentricleSegmenter& seg, const Volume& flair, const Mask& brain,
                        const SegmenterConfig& cfg) {
  cfg.validate();
  if (flair.dims() != brain.dims()) throw Error(ErrorCode::DimMismatch, "brain mask dims differ from image");
  if (count(brain) == 0) throw Error(ErrorCode::EmptyBrainMask, "brain mask is empty");
  if (!cfg.resize_for_network) return postprocess(seg.predict(flair, brain), cfg);

  const int nz = flair.dims()[2];
  const int padded_z = std::max(nz, cfg.network_dims[2]);
  const int below = (padded_z - nz) / 2;
  const Volume padded = pad_slices(flair, padded_z);
  const Mask padded_brain = pad_slices(brain, padded_z);
  const Volume net_in = resample(padded, cfg.network_dims, InterpMode::Linear);
  const Mask net_brain = resample(padded_brain, cfg.network_dims);
  const Volume net_out = seg.predict(net_in, net_brain);
  const Volume back = resample(net_out, padded.dims(), InterpMode::Linear);
  Volume native = crop_slices(back, below, nz);
  // the cropped grid is the original grid up to floating-point round-off
  native = Volume(flair.geometry(), std::vector<float>(native.data().begin(), native.data().end()));
  return postprocess(native, cfg);
}

Mask rule_based_ventricle_segment(const Volume& flair, const Mask& brain, const SegmenterConfig& cfg) {
  return segment_ventricles(RuleBasedSegmenter(cfg), flair, brain, cfg);
}

}  // namespace vqa
