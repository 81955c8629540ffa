#include "vqa/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace vqa {

namespace {

// Byte offsets of the NIfTI-1 header fields we touch.
constexpr int kOffDim = 40;
constexpr int kOffDatatype = 70;
constexpr int kOffBitpix = 72;
constexpr int kOffPixdim = 76;
constexpr int kOffVoxOffset = 108;
constexpr int kOffSclSlope = 112;
constexpr int kOffSclInter = 116;
constexpr int kOffXyztUnits = 123;
constexpr int kOffQformCode = 252;
constexpr int kOffSformCode = 254;
constexpr int kOffQuatern = 256;
constexpr int kOffQoffset = 268;
constexpr int kOffSrow = 280;
constexpr int kOffMagic = 344;
constexpr int kDataOffset = kNiftiHeaderSize;

template <class T>
T load(const std::vector<unsigned char>& buf, std::size_t off) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
  U u = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) u |= U(U(buf[off + b]) << (8 * b));
  return std::bit_cast<T>(u);
}

template <class T>
void store(std::vector<unsigned char>& buf, std::size_t off, T value) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
  const U u = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) buf[off + b] = static_cast<unsigned char>((u >> (8 * b)) & 0xff);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoFailure, "no such file: " + path.string());
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> chunk{};
  for (;;) {
    const int n = gzread(f, chunk.data(), unsigned(chunk.size()));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorCode::TruncatedFile, "corrupt compressed stream in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(f);
  return out;
}

Mat3 quaternion_to_matrix(double b, double c, double d) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= s;
    c *= s;
    d *= s;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  return {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
          2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
          2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b};
}

// Returns (b, c, d, qfac) for an orthonormal direction matrix.
std::array<double, 4> matrix_to_quaternion(Mat3 r) {
  double qfac = 1.0;
  if (determinant(r) < 0) {
    qfac = -1.0;
    r[2] = -r[2];
    r[5] = -r[5];
    r[8] = -r[8];
  }
  double a = r[0] + r[4] + r[8] + 1.0;
  double b, c, d;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    b = 0.25 * (r[7] - r[5]) / a;
    c = 0.25 * (r[2] - r[6]) / a;
    d = 0.25 * (r[3] - r[1]) / a;
  } else {
    const double xd = 1.0 + r[0] - (r[4] + r[8]);
    const double yd = 1.0 + r[4] - (r[0] + r[8]);
    const double zd = 1.0 + r[8] - (r[0] + r[4]);
    if (xd > 1.0) {
      b = 0.5 * std::sqrt(xd);
      c = 0.25 * (r[1] + r[3]) / b;
      d = 0.25 * (r[2] + r[6]) / b;
      a = 0.25 * (r[7] - r[5]) / b;
    } else if (yd > 1.0) {
      c = 0.5 * std::sqrt(yd);
      b = 0.25 * (r[1] + r[3]) / c;
      d = 0.25 * (r[5] + r[7]) / c;
      a = 0.25 * (r[2] - r[6]) / c;
    } else {
      d = 0.5 * std::sqrt(zd);
      b = 0.25 * (r[2] + r[6]) / d;
      c = 0.25 * (r[5] + r[7]) / d;
      a = 0.25 * (r[3] - r[1]) / d;
    }
    if (a < 0) {
      b = -b;
      c = -c;
      d = -d;
    }
  }
  return {b, c, d, qfac};
}

Geometry decode_geometry(const std::vector<unsigned char>& h, std::array<int, 3> dims) {
  Geometry g;
  g.dims = dims;
  std::array<double, 3> pixdim{};
  for (int i = 0; i < 3; ++i) pixdim[i] = std::abs(double(load<float>(h, kOffPixdim + 4 * (i + 1))));

  const auto sform = load<std::int16_t>(h, kOffSformCode);
  const auto qform = load<std::int16_t>(h, kOffQformCode);
  if (sform > 0) {
    for (int c = 0; c < 3; ++c) {
      Vec3 col{load<float>(h, kOffSrow + 4 * c), load<float>(h, kOffSrow + 16 + 4 * c),
               load<float>(h, kOffSrow + 32 + 4 * c)};
      const double len = norm(col);
      if (len <= 0) throw Error(ErrorCode::InvalidArgument, "degenerate sform");
      g.spacing[c] = (pixdim[c] > 0 && std::abs(pixdim[c] - len) <= 1e-4 * len) ? pixdim[c] : len;
      for (int r = 0; r < 3; ++r) g.direction[3 * r + c] = col[r] / len;
    }
    for (int r = 0; r < 3; ++r) g.origin[r] = load<float>(h, kOffSrow + 16 * r + 12);
  } else {
    for (int c = 0; c < 3; ++c) g.spacing[c] = pixdim[c] > 0 ? pixdim[c] : 1.0;
    if (qform > 0) {
      g.direction = quaternion_to_matrix(load<float>(h, kOffQuatern), load<float>(h, kOffQuatern + 4),
                                         load<float>(h, kOffQuatern + 8));
      if (load<float>(h, kOffPixdim) < 0) {
        g.direction[2] = -g.direction[2];
        g.direction[5] = -g.direction[5];
        g.direction[8] = -g.direction[8];
      }
      for (int r = 0; r < 3; ++r) g.origin[r] = load<float>(h, kOffQoffset + 4 * r);
    }
  }
  return g;
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  if (buf.size() < std::size_t(kNiftiHeaderSize)) throw Error(ErrorCode::TruncatedFile, "header shorter than 348 bytes");
  if (load<std::int32_t>(buf, 0) != kNiftiHeaderSize) {
    throw Error(ErrorCode::UnsupportedDatatype, "sizeof_hdr != 348 (big-endian or not NIfTI-1)");
  }
  if (std::memcmp(buf.data() + kOffMagic, "n+1\0", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "expected single-file magic \"n+1\"");
  }

  const int ndim = load<std::int16_t>(buf, kOffDim);
  if (ndim < 1 || ndim > 7) throw Error(ErrorCode::InvalidArgument, "dim[0] out of range");
  std::array<int, 3> dims{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const int d = load<std::int16_t>(buf, kOffDim + 2 * i);
    if (d > kNiftiMaxDim) throw Error(ErrorCode::DimOverflow, "dimension exceeds 4096");
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "non-positive dimension");
    if (i <= 3)
      dims[i - 1] = d;
    else if (d != 1)
      throw Error(ErrorCode::InvalidArgument, "4D and higher volumes are not supported");
  }

  const auto datatype = load<std::int16_t>(buf, kOffDatatype);
  std::size_t bytes = 0;
  switch (datatype) {
    case std::int16_t(NiftiDatatype::UInt8): bytes = 1; break;
    case std::int16_t(NiftiDatatype::Int16): bytes = 2; break;
    case std::int16_t(NiftiDatatype::Float32): bytes = 4; break;
    default: throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(datatype));
  }

  Geometry g = decode_geometry(buf, dims);
  const std::size_t n = g.voxel_count();
  const auto vox_offset = static_cast<std::size_t>(std::max(0.0f, load<float>(buf, kOffVoxOffset)));
  const std::size_t start = std::max<std::size_t>(vox_offset, kNiftiHeaderSize);
  if (buf.size() < start + n * bytes) throw Error(ErrorCode::TruncatedFile, "voxel data shorter than dims imply");

  const float slope = load<float>(buf, kOffSclSlope);
  const float inter = load<float>(buf, kOffSclInter);
  const bool rescale = slope != 0.0f && std::isfinite(slope);

  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = start + i * bytes;
    float v = 0;
    switch (bytes) {
      case 1: v = float(buf[off]); break;
      case 2: v = float(load<std::int16_t>(buf, off)); break;
      default: v = load<float>(buf, off); break;
    }
    data[i] = rescale ? v * slope + inter : v;
  }
  return Volume(g, std::move(data));
}

void write_nifti(const Volume& v, const std::filesystem::path& path, NiftiDatatype type) {
  const Geometry& g = v.geometry();
  for (int d : g.dims)
    if (d > kNiftiMaxDim) throw Error(ErrorCode::DimOverflow, "dimension exceeds 4096");

  std::size_t bytes = 4;
  if (type == NiftiDatatype::UInt8) bytes = 1;
  if (type == NiftiDatatype::Int16) bytes = 2;

  std::vector<unsigned char> buf(kDataOffset + v.size() * bytes, 0);
  store<std::int32_t>(buf, 0, kNiftiHeaderSize);
  store<std::int16_t>(buf, kOffDim, 3);
  for (int i = 0; i < 3; ++i) store<std::int16_t>(buf, kOffDim + 2 * (i + 1), std::int16_t(g.dims[i]));
  for (int i = 4; i <= 7; ++i) store<std::int16_t>(buf, kOffDim + 2 * i, 1);
  store<std::int16_t>(buf, kOffDatatype, std::int16_t(type));
  store<std::int16_t>(buf, kOffBitpix, std::int16_t(8 * bytes));

  const auto q = matrix_to_quaternion(g.direction);
  store<float>(buf, kOffPixdim, float(q[3]));
  for (int i = 0; i < 3; ++i) store<float>(buf, kOffPixdim + 4 * (i + 1), float(g.spacing[i]));
  for (int i = 4; i <= 7; ++i) store<float>(buf, kOffPixdim + 4 * i, 1.0f);
  store<float>(buf, kOffVoxOffset, float(kDataOffset));
  store<float>(buf, kOffSclSlope, 0.0f);
  store<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = 2;  // mm

  store<std::int16_t>(buf, kOffQformCode, 1);
  store<std::int16_t>(buf, kOffSformCode, 1);
  for (int i = 0; i < 3; ++i) store<float>(buf, kOffQuatern + 4 * i, float(q[i]));
  for (int i = 0; i < 3; ++i) store<float>(buf, kOffQoffset + 4 * i, float(g.origin[i]));
  const AffineMap m = g.index_to_world();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) store<float>(buf, kOffSrow + 16 * r + 4 * c, float(m.linear[3 * r + c]));
    store<float>(buf, kOffSrow + 16 * r + 12, float(m.offset[r]));
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);

  for (std::size_t i = 0; i < v.size(); ++i) {
    const float x = v[i];
    const std::size_t off = kDataOffset + i * bytes;
    if (type == NiftiDatatype::Float32) {
      store<float>(buf, off, x);
      continue;
    }
    const float lo = type == NiftiDatatype::UInt8 ? 0.0f : -32768.0f;
    const float hi = type == NiftiDatatype::UInt8 ? 255.0f : 32767.0f;
    if (x != std::round(x) || x < lo || x > hi) {
      throw Error(ErrorCode::InvalidArgument, "value not representable in integer datatype");
    }
    if (type == NiftiDatatype::UInt8)
      buf[off] = static_cast<unsigned char>(x);
    else
      store<std::int16_t>(buf, off, static_cast<std::int16_t>(x));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

Mask read_nifti_mask(const std::filesystem::path& path) {
  const Volume v = read_nifti(path);
  Mask m(v.geometry());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] > 0.5f ? 1 : 0;
  return m;
}

void write_nifti_mask(const Mask& m, const std::filesystem::path& path) {
  write_nifti(to_volume(m), path, NiftiDatatype::UInt8);
}

}  // namespace vqa
