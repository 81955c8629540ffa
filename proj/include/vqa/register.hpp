#pragma once

#include <string>
#include <vector>

#include "vqa/transform.hpp"
#include "vqa/volume.hpp"

namespace vqa {

struct RegParams {
  int pyramid_levels = 3;
  std::vector<int> iters_per_level{100, 60, 30};  // coarsest level first
  double update_step = 1.0;
  double fluid_sigma = 1.0;      // voxels
  double diffusion_sigma = 1.0;  // voxels
  int affine_iters = 200;        // per pyramid level
  double affine_lr = 0.01;
  double convergence_tol = 1e-5;  // relative similarity change

  void validate() const;
};

struct AffineResult {
  AffineMap transform;  // pull-back: fixed world point -> moving world point
  bool converged = true;
  double initial_msd = 0;
  double final_msd = 0;
  int iterations = 0;
};

/// Twelve-parameter affine by gradient descent on the mean-squared
/// difference over a coarse-to-fine pyramid. Inputs are expected in [0, 1].
AffineResult register_affine(const Volume& moving, const Volume& fixed, const RegParams& p);

struct DiffeoResult {
  Diffeo diffeo;  // on fixed's grid
  bool converged = true;
  double initial_cc = 0;
  double final_cc = 0;
  int iterations = 0;
};

/// Log-domain demons: symmetric-gradient demons forces, fluid smoothing
/// of each update, diffusion smoothing of the stationary velocity, per
/// pyramid level. `moving` must already be resampled onto fixed's grid.
/// Returns the best-similarity velocity seen; never worse than identity.
DiffeoResult register_diffeo(const Volume& moving, const Volume& fixed, const RegParams& p);

/// Zero-mean normalized cross-correlation after min-max rescaling both inputs.
double cc_similarity(const Volume& a, const Volume& b);

/// Affine followed by diffeomorphic registration of `moving` onto `fixed`.
struct Registration {
  AffineMap affine;
  Diffeo diffeo;
  Transform forward;  // on fixed's grid: warp(moving, forward) ~ fixed
  Transform inverse;  // on moving's grid: warp(fixed, inverse) ~ moving
  double cc_before = 0;
  double cc_after = 0;
  std::vector<std::string> warnings;
};

Registration register_images(const Volume& moving, const Volume& fixed, const RegParams& p);

/// Registration result with identity transforms between two grids (general atlas to itself).
Registration identity_registration(const Geometry& fixed, const Geometry& moving);

}  // namespace vqa
