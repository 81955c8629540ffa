#pragma once

// Voxel-loop kernels shared by the image, metric and registration modules.
// Each kernel has a serial reference (vqa::kernels::serial) and an OpenMP
// version (vqa::kernels::omp) built from the same per-row bodies; results are
// bit-identical between the two and independent of the thread count.
// Reductions accumulate one partial per z-slice and sum the partials in
// slice order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "vqa/linalg.hpp"
#include "vqa/volume.hpp"

namespace vqa::kernels {

struct Grid {
  int nx = 1, ny = 1, nz = 1;
  std::size_t size() const { return std::size_t(nx) * std::size_t(ny) * std::size_t(nz); }
};

inline Grid grid_of(const Geometry& g) { return {g.dims[0], g.dims[1], g.dims[2]}; }

enum class Interp { Linear, Nearest };
enum class Boundary { Clamp, Zero };

/// Pull-back sampling. For target voxel index c with world position x,
/// the sample location is post(x + u(x)) where u is the optional
/// displacement (world mm, stored on the target grid).
struct SampleSpec {
  Grid target;
  AffineMap target_index_to_world;
  std::array<const float*, 3> displacement{nullptr, nullptr, nullptr};
  AffineMap post;
  AffineMap world_to_source_index;
  Grid source;
  Interp interp = Interp::Linear;
  Boundary boundary = Boundary::Clamp;
};

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Sums needed for Pearson correlation and mean-squared difference.
struct PairMoments {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
};

/// Sum of squared residuals and the residual-weighted gradient moments
/// sum r*g_a*x_b (first 9, row-major) and sum r*g_a (last 3).
struct AffineMoments {
  double ssd = 0;
  std::array<double, 12> grad{};
};

using Field3 = std::array<float*, 3>;
using ConstField3 = std::array<const float*, 3>;

// Separable Gaussian with replicated edges; sigma in voxels per axis, <= 0 skips the axis.
// sample: pull-back interpolation of one or more channels sharing a sample location.
// gradient: central differences in index units, one-sided at the edges.
// demons_update: writes -step * (w - f) * g / (|g|^2 + (w - f)^2), g = (grad f + grad w) / 2,
//   and returns the sum of squared differences.
// affine_moments: residual r = warped - fixed against the coordinates index_to_coords(c).

namespace serial {
void gaussian_smooth(std::span<const float> in, std::span<float> out, Grid g, std::array<double, 3> sigma);
void sample(const SampleSpec& spec, std::span<const float* const> sources, std::span<float* const> outputs);
void gradient(std::span<const float> in, Grid g, Field3 out);
Confusion confusion(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> prediction, Grid g);
PairMoments pair_moments(std::span<const float> a, std::span<const float> b, Grid g);
double demons_update(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_fixed,
                     ConstField3 grad_warped, double step, Grid g, Field3 update);
AffineMoments affine_moments(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_warped,
                             const AffineMap& index_to_coords, Grid g);
}  // namespace serial

namespace omp {
void gaussian_smooth(std::span<const float> in, std::span<float> out, Grid g, std::array<double, 3> sigma);
void sample(const SampleSpec& spec, std::span<const float* const> sources, std::span<float* const> outputs);
void gradient(std::span<const float> in, Grid g, Field3 out);
Confusion confusion(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> prediction, Grid g);
PairMoments pair_moments(std::span<const float> a, std::span<const float> b, Grid g);
double demons_update(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_fixed,
                     ConstField3 grad_warped, double step, Grid g, Field3 update);
AffineMoments affine_moments(std::span<const float> fixed, std::span<const float> warped, ConstField3 grad_warped,
                             const AffineMap& index_to_coords, Grid g);
}  // namespace omp

/// Default entry points (OpenMP).
using omp::confusion;
using omp::affine_moments;
using omp::demons_update;
using omp::gaussian_smooth;
using omp::gradient;
using omp::pair_moments;
using omp::sample;

}  // namespace vqa::kernels
