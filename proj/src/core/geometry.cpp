#include <cmath>
#include <string>

#include "vqa/volume.hpp"

namespace vqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::DegenerateIntensityRange: return "DegenerateIntensityRange";
    case ErrorCode::TargetSmallerThanSource: return "TargetSmallerThanSource";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::EmptyBrainMask: return "EmptyBrainMask";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::AllRegistrationsFailed: return "AllRegistrationsFailed";
    case ErrorCode::MissingGeneralQuality: return "MissingGeneralQuality";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::NoSubjectsPass: return "NoSubjectsPass";
  }
  return "Unknown";
}

Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  if (std::abs(det) < 1e-300) throw Error(ErrorCode::InvalidArgument, "singular 3x3 matrix");
  const double inv = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv, (m[1] * m[5] - m[2] * m[4]) * inv,
          (m[5] * m[6] - m[3] * m[8]) * inv, (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
          (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv, (m[0] * m[4] - m[1] * m[3]) * inv};
}

Mat3 rotation_xyz(double rx, double ry, double rz) {
  const double cx = std::cos(rx), sx = std::sin(rx);
  const double cy = std::cos(ry), sy = std::sin(ry);
  const double cz = std::cos(rz), sz = std::sin(rz);
  const Mat3 Rx{1, 0, 0, 0, cx, -sx, 0, sx, cx};
  const Mat3 Ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const Mat3 Rz{cz, -sz, 0, sz, cz, 0, 0, 0, 1};
  return mul(Rz, mul(Ry, Rx));
}

AffineMap AffineMap::inverse() const {
  AffineMap r;
  r.linear = vqa::inverse(linear);
  const Vec3 t = mul(r.linear, offset);
  r.offset = {-t[0], -t[1], -t[2]};
  return r;
}

AffineMap operator*(const AffineMap& a, const AffineMap& b) {
  AffineMap r;
  r.linear = mul(a.linear, b.linear);
  r.offset = mul(a.linear, b.offset) + a.offset;
  return r;
}

AffineMap Geometry::index_to_world() const {
  AffineMap m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m.linear[3 * r + c] = direction[3 * r + c] * spacing[c];
  m.offset = origin;
  return m;
}

AffineMap Geometry::world_to_index() const {
  return index_to_world().inverse();
}

void Geometry::validate() const {
  for (int d : dims)
    if (d <= 0) throw Error(ErrorCode::InvalidArgument, "dims must be positive");
  for (double s : spacing)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  for (int c = 0; c < 3; ++c) {
    const double n = std::sqrt(direction[c] * direction[c] + direction[3 + c] * direction[3 + c] +
                               direction[6 + c] * direction[6 + c]);
    if (std::abs(n - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "orientation columns must be unit-norm");
  }
}

bool same_grid(const Geometry& a, const Geometry& b, double tol) {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.spacing[i] - b.spacing[i]) > tol) return false;
    if (std::abs(a.origin[i] - b.origin[i]) > tol * std::max(1.0, std::abs(a.origin[i]))) return false;
  }
  for (int i = 0; i < 9; ++i)
    if (std::abs(a.direction[i] - b.direction[i]) > tol) return false;
  return true;
}

Geometry centered_grid(std::array<int, 3> dims, double spacing) {
  Geometry g;
  g.dims = dims;
  g.spacing = {spacing, spacing, spacing};
  for (int i = 0; i < 3; ++i) g.origin[i] = -0.5 * (dims[i] - 1) * spacing;
  return g;
}

std::size_t count(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

bool is_binary(const Mask& m) {
  for (auto v : m.data())
    if (v > 1) return false;
  return true;
}

Volume to_volume(const Mask& m) {
  Volume v(m.geometry());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i] ? 1.0f : 0.0f;
  return v;
}

Mask to_mask(const Volume& v) {
  Mask m(v.geometry());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] >= 0.5f ? 1 : 0;
  return m;
}

namespace {
template <class Op>
Mask combine(const Mask& a, const Mask& b, Op op) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ");
  Mask r(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = op(a[i] != 0, b[i] != 0) ? 1 : 0;
  return r;
}
}  // namespace

Mask mask_and(const Mask& a, const Mask& b) { return combine(a, b, [](bool x, bool y) { return x && y; }); }
Mask mask_or(const Mask& a, const Mask& b) { return combine(a, b, [](bool x, bool y) { return x || y; }); }
Mask mask_minus(const Mask& a, const Mask& b) { return combine(a, b, [](bool x, bool y) { return x && !y; }); }

bool is_subset(const Mask& inner, const Mask& outer) {
  if (inner.dims() != outer.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ");
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

Vec3 centroid_world(const Mask& m) {
  const auto& g = m.geometry();
  Vec3 acc{0, 0, 0};
  std::size_t n = 0;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (m(i, j, k)) {
          acc = acc + Vec3{double(i), double(j), double(k)};
          ++n;
        }
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "centroid of empty mask");
  return g.to_world((1.0 / double(n)) * acc);
}

}  // namespace vqa
