#pragma once

#include <variant>
#include <vector>

#include "vqa/kernels.hpp"
#include "vqa/resample.hpp"
#include "vqa/volume.hpp"

namespace vqa {

/// Per-voxel world displacement (mm) on a reference grid.
struct DisplacementField {
  Geometry geometry;
  std::vector<float> x, y, z;

  DisplacementField() = default;
  explicit DisplacementField(const Geometry& g);

  std::size_t size() const { return x.size(); }
  Vec3 at(std::size_t i) const { return {x[i], y[i], z[i]}; }
  kernels::ConstField3 channels() const { return {x.data(), y.data(), z.data()}; }
  kernels::Field3 channels() { return {x.data(), y.data(), z.data()}; }
  /// Largest displacement length, mm.
  double max_norm() const;
  /// Throws NonFiniteField on NaN/inf.
  void check_finite() const;
  DisplacementField scaled(double s) const;

  bool operator==(const DisplacementField&) const = default;
};

/// Pull-back transform from a target space to a source space: warping samples
/// the source at map(x) for every target point x. A dense transform maps
/// x -> x + u(x) with u interpolated (edge-clamped) from its grid.
class Transform {
 public:
  Transform() = default;
  explicit Transform(AffineMap a) : rep_(a) {}
  explicit Transform(DisplacementField f) : rep_(std::move(f)) {}

  static Transform identity() { return Transform(AffineMap{}); }

  bool is_affine() const { return std::holds_alternative<AffineMap>(rep_); }
  const AffineMap& affine() const { return std::get<AffineMap>(rep_); }
  const DisplacementField& field() const { return std::get<DisplacementField>(rep_); }

  Vec3 map(const Vec3& world) const;

 private:
  std::variant<AffineMap, DisplacementField> rep_{AffineMap{}};
};

/// Pull-back warp onto `target`. Dense transforms require `target` to be their grid.
Volume warp(const Volume& v, const Transform& t, const Geometry& target, InterpMode mode);
/// Target grid is the field grid for dense transforms and v's grid for affine ones.
Volume warp(const Volume& v, const Transform& t, InterpMode mode);
/// Masks always use nearest-neighbour sampling.
Mask warp(const Mask& m, const Transform& t, const Geometry& target);
Mask warp(const Mask& m, const Transform& t);

/// Transform mapping x to inner.map(outer.map(x)), so that
/// warp(v, compose(outer, inner)) == warp(warp(v, inner), outer).
/// The result lives on outer's grid; two affines compose exactly.
/// Throws GeometryMismatch when outer is affine and inner is dense (use the
/// overload taking a grid).
Transform compose(const Transform& outer, const Transform& inner);
/// Dense result on `grid` (or exact affine when both are affine).
Transform compose(const Transform& outer, const Transform& inner, const Geometry& grid);

/// Dense displacement of `t` sampled on `grid`.
DisplacementField to_field(const Transform& t, const Geometry& grid);

/// exp(v) by scaling and squaring with `steps` self-compositions.
DisplacementField exponentiate(const DisplacementField& velocity, int steps);

/// Smallest step count >= min_steps that brings the scaled velocity below half a voxel.
int squaring_steps_for(const DisplacementField& velocity, int min_steps);

/// Stationary-velocity diffeomorphism with cached exp(v) and exp(-v).
struct Diffeo {
  DisplacementField velocity;
  int squaring_steps = 6;
  DisplacementField forward;
  DisplacementField inverse;

  static Diffeo from_velocity(DisplacementField velocity, int min_steps = 6);
  static Diffeo identity(const Geometry& g);

  Transform forward_transform() const { return Transform(forward); }
  Transform inverse_transform() const { return Transform(inverse); }
};

struct InverseResidual {
  double mean = 0;  // voxels
  double max = 0;   // voxels
};

/// Residual of x -> inverse(forward(x)) against the identity, on forward's grid.
InverseResidual inverse_consistency(const DisplacementField& forward, const DisplacementField& inverse);

}  // namespace vqa
