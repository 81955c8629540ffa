#pragma once

#include <cstdint>
#include <filesystem>

#include "vqa/volume.hpp"

namespace vqa {

/// On-disk voxel types understood by the reader. The writer defaults to Float32.
enum class NiftiDatatype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

inline constexpr int kNiftiHeaderSize = 348;
inline constexpr int kNiftiMaxDim = 4096;

/// Single-file little-endian NIfTI-1 (`n+1`), optionally gzip-compressed.
/// Geometry comes from the sform when sform_code > 0, otherwise the qform,
/// otherwise pixdim alone. scl_slope/scl_inter are applied when slope != 0.
Volume read_nifti(const std::filesystem::path& path);

/// Writes the 348-byte header immediately followed by the voxel data (vox_offset = 348).
/// Integer datatypes require integral values in range.
void write_nifti(const Volume& v, const std::filesystem::path& path, NiftiDatatype type = NiftiDatatype::Float32);

Mask read_nifti_mask(const std::filesystem::path& path);
void write_nifti_mask(const Mask& m, const std::filesystem::path& path);

}  // namespace vqa
