#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "vqa/transform.hpp"

namespace vqa {

/// Forward/inverse dense transforms persisted as six scalar NIfTI volumes
/// `<prefix>_fx/_fy/_fz.nii` and `<prefix>_ix/_iy/_iz.nii` plus a JSON
/// sidecar `<prefix>.json`.
struct TransformPair {
  Transform forward;
  Transform inverse;
  nlohmann::json meta = nlohmann::json::object();
};

void write_field(const DisplacementField& f, const std::filesystem::path& dir, const std::string& stem);
DisplacementField read_field(const std::filesystem::path& dir, const std::string& stem);

/// Affine members are written densely on `forward_grid` / `inverse_grid`.
void write_transform_pair(const TransformPair& t, const std::filesystem::path& dir, const std::string& prefix,
                          const Geometry& forward_grid, const Geometry& inverse_grid);
TransformPair read_transform_pair(const std::filesystem::path& dir, const std::string& prefix);

nlohmann::json to_json(const AffineMap& a);
AffineMap affine_from_json(const nlohmann::json& j);

}  // namespace vqa
