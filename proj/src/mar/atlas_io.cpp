#include <fstream>

#include "json.hpp"
#include "vqa/error.hpp"
#include "vqa/mar.hpp"
#include "vqa/nifti.hpp"
#include "vqa/transform_io.hpp"

namespace vqa {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atlas_set(const AtlasSet& s, const fs::path& dir) {
  s.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  const Geometry& g = s.general().image.geometry();
  json j;
  j["atlases"] = json::array();
  for (const auto& a : s.atlases) {
    json e{{"id", a.id}, {"age_band", to_string(a.age_band)}, {"image", a.id + ".nii"}};
    write_nifti(a.image, dir / (a.id + ".nii"));
    if (a.is_general()) {
      e["to_general"] = nullptr;
    } else {
      const std::string prefix = a.id + "_to_general";
      write_transform_pair({a.to_general, a.from_general, json{{"atlas", a.id}}}, dir, prefix, g, a.image.geometry());
      e["to_general"] = prefix;
    }
    if (a.ventricles) {
      write_nifti_mask(*a.ventricles, dir / (a.id + "_ventricles.nii"));
      e["ventricles"] = a.id + "_ventricles.nii";
    }
    if (a.brain) {
      write_nifti_mask(*a.brain, dir / (a.id + "_brain.nii"));
      e["brain"] = a.id + "_brain.nii";
    }
    j["atlases"].push_back(e);
  }
  write_nifti_mask(s.ventricles_general, dir / "ventricles_general.nii");
  j["ventricles_general"] = "ventricles_general.nii";
  std::ofstream out(dir / "atlas.json");
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "atlas.json").string());
  out << j.dump(2) << "\n";
}

AtlasSet read_atlas_set(const fs::path& dir) {
  std::ifstream in(dir / "atlas.json");
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + (dir / "atlas.json").string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, "atlas.json: " + std::string(e.what()));
  }
  AtlasSet s;
  try {
    for (const auto& e : j.at("atlases")) {
      Atlas a;
      a.id = e.at("id").get<std::string>();
      a.age_band = age_band_from_string(e.at("age_band").get<std::string>());
      a.image = read_nifti(dir / e.at("image").get<std::string>());
      if (e.contains("to_general") && !e["to_general"].is_null()) {
        TransformPair t = read_transform_pair(dir, e["to_general"].get<std::string>());
        a.to_general = std::move(t.forward);
        a.from_general = std::move(t.inverse);
      }
      if (e.contains("ventricles")) a.ventricles = read_nifti_mask(dir / e["ventricles"].get<std::string>());
      if (e.contains("brain")) a.brain = read_nifti_mask(dir / e["brain"].get<std::string>());
      s.atlases.push_back(std::move(a));
    }
    s.ventricles_general = read_nifti_mask(dir / j.at("ventricles_general").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, "atlas.json: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

}  // namespace vqa
