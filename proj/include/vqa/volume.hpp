#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vqa/error.hpp"
#include "vqa/linalg.hpp"

namespace vqa {

/// Sampling grid of a volume. World position of voxel index c is
/// origin + direction * diag(spacing) * c; index 0 is the first voxel center.
struct Geometry {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing{1, 1, 1};
  Vec3 origin{0, 0, 0};
  Mat3 direction = kIdentity3;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }

  AffineMap index_to_world() const;
  AffineMap world_to_index() const;
  Vec3 to_world(const Vec3& ijk) const { return index_to_world().apply(ijk); }
  Vec3 to_index(const Vec3& p) const { return world_to_index().apply(p); }

  /// Throws InvalidArgument when dims/spacing/orientation invariants fail.
  void validate() const;

  bool operator==(const Geometry&) const = default;
};

/// Grids agree within `tol` in every geometric field and exactly in dims.
bool same_grid(const Geometry& a, const Geometry& b, double tol = 1e-6);

/// Isotropic axis-aligned grid centred on the world origin.
Geometry centered_grid(std::array<int, 3> dims, double spacing);

template <class T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  explicit Image(Geometry g, T fill = T{}) : geom_(std::move(g)), data_(geom_.voxel_count(), fill) {
    geom_.validate();
  }
  Image(Geometry g, std::vector<T> data) : geom_(std::move(g)), data_(std::move(data)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count())
      throw Error(ErrorCode::DimMismatch, "data length does not match dims");
  }

  const Geometry& geometry() const { return geom_; }
  const std::array<int, 3>& dims() const { return geom_.dims; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(int i, int j, int k) { return data_[geom_.index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data_[geom_.index(i, j, k)]; }

  /// Same grid, new contents.
  template <class U>
  Image<U> like(U fill = U{}) const {
    return Image<U>(geom_, fill);
  }

  bool operator==(const Image&) const = default;

 private:
  Geometry geom_;
  std::vector<T> data_;
};

using Volume = Image<float>;
using Mask = Image<std::uint8_t>;

std::size_t count(const Mask& m);
bool is_binary(const Mask& m);
Volume to_volume(const Mask& m);
/// Voxels with value >= 0.5 become foreground.
Mask to_mask(const Volume& v);
Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_minus(const Mask& a, const Mask& b);
/// True when every foreground voxel of `inner` is foreground in `outer`.
bool is_subset(const Mask& inner, const Mask& outer);
/// Centroid of the foreground in world coordinates.
Vec3 centroid_world(const Mask& m);

}  // namespace vqa
