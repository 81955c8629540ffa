#include <cmath>
#include <numbers>

#include "vqa/kernels.hpp"
#include "vqa/rng.hpp"
#include "vqa/segment.hpp"

namespace vqa {

AugmentParams AugmentParams::from_mean_intensity(double mu, std::uint64_t seed) {
  AugmentParams p;
  p.ventricle_boost_max = 2 * mu;
  p.dark_perturb_max = 2 * mu;
  p.seed = seed;
  return p;
}

void AugmentParams::validate() const {
  if (max_translation < 0 || max_rotation < 0 || ventricle_boost_max < 0 || dark_perturb_max < 0)
    throw Error(ErrorCode::InvalidArgument, "augmentation magnitudes must be non-negative");
  if (max_rotation > std::numbers::pi) throw Error(ErrorCode::InvalidArgument, "max_rotation must be <= pi");
  if (!(dark_cutoff > 0 && dark_cutoff < 1)) throw Error(ErrorCode::InvalidArgument, "dark_cutoff must lie in (0,1)");
  if (coronal_flip_prob < 0 || coronal_flip_prob > 1) throw Error(ErrorCode::InvalidArgument, "flip probability");
}

Augmented augment(const Volume& image, const Mask& ventricles, const AugmentParams& p) {
  p.validate();
  if (image.dims() != ventricles.dims()) throw Error(ErrorCode::DimMismatch, "ventricle mask dims differ from image");

  Rng rng(p.seed);
  AugmentDraw d;
  d.ventricle_boost = rng.uniform(0, p.ventricle_boost_max);
  d.dark_offset = rng.uniform(-p.dark_perturb_max, p.dark_perturb_max);
  for (auto& t : d.translation) t = rng.uniform(-p.max_translation, p.max_translation);
  for (auto& r : d.rotation) r = rng.uniform(-p.max_rotation, p.max_rotation);
  d.flip = rng.uniform() < p.coronal_flip_prob;

  Volume shifted = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (ventricles[i])
      shifted[i] = float(double(image[i]) + d.ventricle_boost);
    else if (image[i] < p.dark_cutoff)
      shifted[i] = float(double(image[i]) + d.dark_offset);
  }

  // forward motion in index space: y = c + t + R F (x - c); sampled by its inverse
  const auto dims = image.dims();
  const Vec3 centre{0.5 * (dims[0] - 1), 0.5 * (dims[1] - 1), 0.5 * (dims[2] - 1)};
  Mat3 flip = kIdentity3;
  if (d.flip) flip[4] = -1;
  AffineMap forward;
  forward.linear = mul(rotation_xyz(d.rotation[0], d.rotation[1], d.rotation[2]), flip);
  forward.offset = centre + d.translation - mul(forward.linear, centre);

  kernels::SampleSpec spec;
  spec.target = kernels::grid_of(image.geometry());
  spec.source = spec.target;
  spec.target_index_to_world = forward.inverse();
  spec.boundary = kernels::Boundary::Zero;

  Augmented out{Volume(image.geometry()), Mask(image.geometry()), d};
  {
    const float* src[] = {shifted.data().data()};
    float* dst[] = {out.image.data().data()};
    kernels::sample(spec, src, dst);
  }
  {
    const Volume vent = to_volume(ventricles);
    Volume warped(image.geometry());
    spec.interp = kernels::Interp::Nearest;
    const float* src[] = {vent.data().data()};
    float* dst[] = {warped.data().data()};
    kernels::sample(spec, src, dst);
    out.ventricles = to_mask(warped);
  }
  return out;
}

}  // namespace vqa
