#include "vqa/transform_io.hpp"

#include <fstream>

#include "vqa/nifti.hpp"

namespace vqa {

namespace {

void write_channel(const std::vector<float>& data, const Geometry& g, const std::filesystem::path& p) {
  write_nifti(Volume(g, data), p);
}

}  // namespace

void write_field(const DisplacementField& f, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_channel(f.x, f.geometry, dir / (stem + "x.nii"));
  write_channel(f.y, f.geometry, dir / (stem + "y.nii"));
  write_channel(f.z, f.geometry, dir / (stem + "z.nii"));
}

DisplacementField read_field(const std::filesystem::path& dir, const std::string& stem) {
  const Volume x = read_nifti(dir / (stem + "x.nii"));
  const Volume y = read_nifti(dir / (stem + "y.nii"));
  const Volume z = read_nifti(dir / (stem + "z.nii"));
  if (!same_grid(x.geometry(), y.geometry()) || !same_grid(x.geometry(), z.geometry()))
    throw Error(ErrorCode::GeometryMismatch, "displacement components on different grids: " + stem);
  DisplacementField f;
  f.geometry = x.geometry();
  f.x = x.values();
  f.y = y.values();
  f.z = z.values();
  f.check_finite();
  return f;
}

void write_transform_pair(const TransformPair& t, const std::filesystem::path& dir, const std::string& prefix,
                          const Geometry& forward_grid, const Geometry& inverse_grid) {
  write_field(to_field(t.forward, forward_grid), dir, prefix + "_f");
  write_field(to_field(t.inverse, inverse_grid), dir, prefix + "_i");
  std::ofstream out(dir / (prefix + ".json"));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write sidecar for " + prefix);
  out << t.meta.dump(2) << "\n";
}

TransformPair read_transform_pair(const std::filesystem::path& dir, const std::string& prefix) {
  TransformPair t;
  t.forward = Transform(read_field(dir, prefix + "_f"));
  t.inverse = Transform(read_field(dir, prefix + "_i"));
  std::ifstream in(dir / (prefix + ".json"));
  if (in) t.meta = nlohmann::json::parse(in);
  return t;
}

nlohmann::json to_json(const AffineMap& a) {
  return nlohmann::json{{"linear", a.linear}, {"offset", a.offset}};
}

AffineMap affine_from_json(const nlohmann::json& j) {
  AffineMap a;
  a.linear = j.at("linear").get<Mat3>();
  a.offset = j.at("offset").get<Vec3>();
  return a;
}

}  // namespace vqa
