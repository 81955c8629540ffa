// vqa: ventricle-based registration quality assessment and multi-atlas registration.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqa/error.hpp"
#include "vqa/intensity.hpp"
#include "vqa/mar.hpp"
#include "vqa/metrics.hpp"
#include "vqa/nifti.hpp"
#include "vqa/phantom.hpp"
#include "vqa/pipeline.hpp"
#include "vqa/segment.hpp"
#include "vqa/transform_io.hpp"
#include "vqa/wmhmap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitFailure = 2;
constexpr int kExitFlagged = 3;

struct Global {
  int workers = 1;
  std::uint64_t seed = 7;
  std::string config;
};

bool is_io(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoFailure:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
    case ErrorCode::UnsupportedDatatype:
    case ErrorCode::DimOverflow: return true;
    default: return false;
  }
}

json load_config(const Global& g) {
  if (g.config.empty()) return json::object();
  std::ifstream in(g.config);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + g.config);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, "config: " + std::string(e.what()));
  }
}

PipelineConfig base_config(const Global& g) {
  PipelineConfig c = pipeline_config_from_json(load_config(g));
  c.workers = g.workers;
  c.seed = g.seed;
  return c;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  out << j.dump(2) << "\n";
}

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + d.string() + ": " + ec.message());
}

fs::path parent_or_dot(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

// Reads a volume; every failure here is an I/O failure for the exit-code contract.
Volume load_volume(const std::string& p) { return read_nifti(p); }
Mask load_mask(const std::string& p) { return read_nifti_mask(p); }

int cmd_phantom(const Global& g, int n, const std::string& out_dir, const CohortOptions& opt, int size) {
  const std::string started = utc_timestamp();
  const fs::path dir(out_dir);
  PhantomSpec base;
  base.dims = {size, size, size};
  base.spacing = 128.0 / size;
  base.validate();
  const AtlasSet atlases = make_atlas_set(g.seed, base);
  const auto cohort = make_cohort(n, atlases, g.seed, opt);
  write_phantom_dataset(dir, atlases, cohort, cohort_wmh_general(atlases, g.seed, opt.wmh_load), g.seed);
  write_run_manifest(dir, "phantom",
                     json{{"n", n}, {"seed", g.seed}, {"size", size}, {"max_disp_mm", opt.max_disp_mm}, {"smooth_sigma", opt.smooth_sigma},
                          {"noise_sigma", opt.noise_sigma}, {"wmh_load", opt.wmh_load}},
                     started, utc_timestamp());
  std::printf("wrote %d subjects and atlas set to %s\n", n, dir.string().c_str());
  return kExitOk;
}

int cmd_segment(const Global& g, const std::string& flair_p, const std::string& brain_p, const std::string& out_p,
                std::optional<int> min_component, std::optional<double> binarize) {
  const std::string started = utc_timestamp();
  PipelineConfig c = base_config(g);
  if (min_component) c.seg.min_component_voxels = *min_component;
  if (binarize) c.seg.binarize_level = *binarize;
  c.seg.validate();
  const Volume flair = load_volume(flair_p);
  const Mask brain = load_mask(brain_p);
  const Mask seg = rule_based_ventricle_segment(flair, brain, c.seg);
  ensure_dir(parent_or_dot(out_p));
  write_nifti_mask(seg, out_p);
  write_run_manifest(parent_or_dot(out_p), "segment", json{{"seg", to_json(c.seg)}}, started, utc_timestamp());
  std::printf("%zu ventricle voxels\n", count(seg));
  return kExitOk;
}

int cmd_register(const Global& g, const std::string& moving_p, const std::string& fixed_p, const std::string& out_dir,
                 const std::string& prefix) {
  const std::string started = utc_timestamp();
  const PipelineConfig c = base_config(g);
  const Volume moving = load_volume(moving_p);
  const Volume fixed = load_volume(fixed_p);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  const Registration r = register_images(percentile_normalize(moving), percentile_normalize(fixed), c.reg);
  json meta{{"params", to_json(c.reg)},
            {"affine", to_json(r.affine)},
            {"cc_before", r.cc_before},
            {"cc_after", r.cc_after},
            {"squaring_steps", r.diffeo.squaring_steps},
            {"warnings", r.warnings}};
  write_transform_pair({r.forward, r.inverse, meta}, dir, prefix, fixed.geometry(), moving.geometry());
  write_nifti(warp(moving, r.forward, fixed.geometry(), InterpMode::Linear), dir / (prefix + "_warped.nii"));
  write_run_manifest(dir, "register", json{{"reg", to_json(c.reg)}}, started, utc_timestamp());
  std::printf("cc %.4f -> %.4f\n", r.cc_before, r.cc_after);
  return kExitOk;
}

int cmd_qa(const Global& g, const std::string& image_p, const std::string& vent_p, const std::string& atlas_dir,
           double flag_below, const std::string& out_dir) {
  const std::string started = utc_timestamp();
  const PipelineConfig c = base_config(g);
  Volume image;
  Mask vents;
  AtlasSet atlases;
  try {
    image = load_volume(image_p);
    vents = load_mask(vent_p);
    atlases = read_atlas_set(atlas_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "vqa qa: %s\n", e.what());
    return kExitIo;
  }
  const fs::path dir(out_dir);
  ensure_dir(dir);
  json report;
  std::vector<std::string> flags;
  double q = 0, cc = 0;
  try {
    const Atlas& general = atlases.general();
    const Registration r = register_images(percentile_normalize(image), general.image, c.reg);
    const Mask prop = propagate_ventricles(atlases, general, r, image.geometry());
    q = quality_dice(vents, prop, &flags);
    cc = r.cc_after;
    for (const auto& w : r.warnings) flags.push_back(w);
  } catch (const Error& e) {
    if (is_io(e.code())) throw;
    std::fprintf(stderr, "vqa qa: registration failed: %s\n", e.what());
    write_json(dir / "qa_report.json", json{{"error", e.what()}, {"atlas", "g"}});
    return kExitFailure;
  }
  const bool flagged = q < flag_below;
  if (flagged) flags.emplace_back("quality below " + std::to_string(flag_below));
  report = json{{"atlas", atlases.general().id}, {"q", q},       {"cc", cc},
                {"flag_below", flag_below},       {"flagged", flagged}, {"flags", flags}};
  write_json(dir / "qa_report.json", report);
  write_run_manifest(dir, "qa", json{{"reg", to_json(c.reg)}, {"flag_below", flag_below}}, started, utc_timestamp());
  std::printf("Q %.4f  CC %.4f%s\n", q, cc, flagged ? "  FLAGGED" : "");
  return flagged ? kExitFlagged : kExitOk;
}

int cmd_mar(const Global& g, const std::string& image_p, const std::string& vent_p, const std::string& atlas_dir,
            const std::string& strategy, const std::string& out_dir) {
  const std::string started = utc_timestamp();
  const PipelineConfig c = base_config(g);
  const Volume image = load_volume(image_p);
  const Mask vents = load_mask(vent_p);
  const AtlasSet atlases = read_atlas_set(atlas_dir);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  const MarResult r = run_mar(percentile_normalize(image), vents, atlases, c.reg, strategy_from_string(strategy));
  json j = to_json(r);
  j["final_transform"] = {"final_fx.nii", "final_fy.nii", "final_fz.nii"};
  write_field(to_field(r.final_transform, atlases.general().image.geometry()), dir, "final_f");
  write_json(dir / "mar_result.json", j);
  write_run_manifest(dir, "mar", json{{"reg", to_json(c.reg)}, {"strategy", strategy}}, started, utc_timestamp());
  std::printf("selected %s  gain %.4f\n", r.selected.c_str(), r.gain);
  return kExitOk;
}

// Reads per-subject results written by `vqa pipeline`.
int cmd_wmh_map(const Global&, const std::string& cohort_dir, double threshold, const std::string& out_p) {
  const std::string started = utc_timestamp();
  const fs::path subjects = fs::path(cohort_dir) / "subjects";
  if (!fs::is_directory(subjects)) throw Error(ErrorCode::IoFailure, "no subjects/ results under " + cohort_dir);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(subjects))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<BurdenEntry> entries;
  for (const auto& d : dirs) {
    if (!fs::exists(d / "wmh_general.nii")) continue;
    std::ifstream in(d / "mar_result.json");
    if (!in) throw Error(ErrorCode::IoFailure, "missing " + (d / "mar_result.json").string());
    const json r = json::parse(in);
    const auto& q = r.at("dice_quality").at(r.at("selected").get<std::string>());
    if (q.is_null()) continue;
    entries.push_back({read_nifti_mask(d / "wmh_general.nii"), q.get<double>()});
  }
  const BurdenMap b = build_burden_map(entries, threshold);
  ensure_dir(parent_or_dot(out_p));
  write_nifti(b.map, out_p);
  fs::path sidecar = out_p;
  sidecar.replace_extension(".json");
  write_json(sidecar, json{{"threshold", threshold}, {"n_included", b.n_included}, {"n_total", b.n_total},
                           {"flags", b.flags}});
  write_run_manifest(parent_or_dot(out_p), "wmh-map", json{{"cohort_dir", cohort_dir}, {"threshold", threshold}},
                     started, utc_timestamp());
  std::printf("%d of %d subjects included\n", b.n_included, b.n_total);
  return kExitOk;
}

int cmd_metrics(const std::string& ref_p, const std::string& pred_p, const std::string& id, const std::string& out_p) {
  const Mask ref = load_mask(ref_p);
  const Mask pred = load_mask(pred_p);
  const MetricPanel p = metric_panel(ref, pred);
  json j = json::object();
  const auto& keys = MetricPanel::keys();
  const auto vals = p.values();
  for (std::size_t i = 0; i < keys.size(); ++i) j[keys[i]] = vals[i] ? json(*vals[i]) : json(nullptr);
  j["flags"] = p.flags;
  if (!out_p.empty()) {
    ensure_dir(parent_or_dot(out_p));
    if (fs::path(out_p).extension() == ".csv") {
      std::ofstream out(out_p);
      if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + out_p);
      out << panel_csv_header() << "\n" << panel_csv_row(id, p) << "\n";
    } else {
      write_json(out_p, j);
    }
  }
  std::printf("%s\n", j.dump().c_str());
  return kExitOk;
}

int cmd_pipeline(const Global& g, const std::string& atlas_dir, const std::string& cohort_dir, const std::string& out,
                 const std::string& strategy, const std::vector<double>& thresholds) {
  const std::string started = utc_timestamp();
  PipelineConfig c = base_config(g);
  if (!atlas_dir.empty()) c.atlas_dir = atlas_dir;
  if (!cohort_dir.empty()) c.cohort_dir = cohort_dir;
  if (!out.empty()) c.out_dir = out;
  if (!strategy.empty()) c.strategy = strategy_from_string(strategy);
  if (!thresholds.empty()) c.thresholds = thresholds;
  if (c.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "pipeline needs --out");
  c.validate();
  const CohortSummary s = run_pipeline(c);
  write_run_manifest(c.out_dir, "pipeline", to_json(c), started, utc_timestamp());
  std::printf("%zu of %d subjects completed; mean gain %.4f\n", s.completed.size(), s.n, s.mean_gain);
  return s.completed.empty() ? kExitFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ventricle-based registration quality assessment and multi-atlas registration"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--workers", g.workers, "Worker threads for cohort processing")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);

  std::function<int()> run;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic atlas set and cohort");
  int n = 30;
  std::string out_dir;
  CohortOptions copt;
  phantom->add_option("--n", n, "Number of subjects")->check(CLI::PositiveNumber);
  phantom->add_option("--out-dir", out_dir, "Output directory")->required();
  phantom->add_option("--max-disp", copt.max_disp_mm, "Largest deformation, mm");
  phantom->add_option("--wmh-load", copt.wmh_load, "Lesion load in [0, 1]");
  phantom->add_option("--noise", copt.noise_sigma, "Noise sigma");
  int size = 64;
  phantom->add_option("--size", size, "Grid voxels per axis over a 128 mm field of view")->check(CLI::Range(8, 256));
  phantom->callback([&] { run = [&] { return cmd_phantom(g, n, out_dir, copt, size); }; });

  auto* segment = app.add_subcommand("segment", "Segment the ventricles of a FLAIR image");
  std::string flair, brain, out;
  std::optional<int> min_component;
  std::optional<double> binarize;
  segment->add_option("--flair", flair)->required();
  segment->add_option("--brain-mask", brain)->required();
  segment->add_option("--out", out)->required();
  segment->add_option("--min-component", min_component, "Smallest kept component, voxels");
  segment->add_option("--binarize", binarize, "Probability threshold");
  segment->callback([&] { run = [&] { return cmd_segment(g, flair, brain, out, min_component, binarize); }; });

  auto* reg = app.add_subcommand("register", "Affine plus diffeomorphic registration of two images");
  std::string moving, fixed, out_transform, prefix = "transform";
  reg->add_option("--moving", moving)->required();
  reg->add_option("--fixed", fixed)->required();
  reg->add_option("--out-transform", out_transform, "Output directory")->required();
  reg->add_option("--prefix", prefix, "File prefix");
  reg->callback([&] { run = [&] { return cmd_register(g, moving, fixed, out_transform, prefix); }; });

  auto* qa = app.add_subcommand("qa", "Registration quality against the general atlas");
  std::string image, ventricles, atlas_dir;
  double flag_below = 0.6;
  qa->add_option("--image", image)->required();
  qa->add_option("--ventricles", ventricles)->required();
  qa->add_option("--atlas-dir", atlas_dir)->required();
  qa->add_option("--flag-below", flag_below, "Exit 3 when Q falls below this value");
  qa->add_option("--out", out, "Report directory")->default_val(".");
  qa->callback([&] { run = [&] { return cmd_qa(g, image, ventricles, atlas_dir, flag_below, out); }; });

  auto* mar = app.add_subcommand("mar", "Multi-atlas registration with quality-based atlas selection");
  std::string strategy = "dice";
  mar->add_option("--image", image)->required();
  mar->add_option("--ventricles", ventricles)->required();
  mar->add_option("--atlas-dir", atlas_dir)->required();
  mar->add_option("--strategy", strategy)->check(CLI::IsMember({"dice", "cc"}));
  mar->add_option("--out", out)->required();
  mar->callback([&] { run = [&] { return cmd_mar(g, image, ventricles, atlas_dir, strategy, out); }; });

  auto* wmh = app.add_subcommand("wmh-map", "Quality-thresholded lesion burden map from pipeline results");
  std::string cohort_dir;
  double threshold = 0.6;
  wmh->add_option("--cohort-dir", cohort_dir, "Pipeline output directory")->required();
  wmh->add_option("--threshold", threshold);
  wmh->add_option("--out", out)->required();
  wmh->callback([&] { run = [&] { return cmd_wmh_map(g, cohort_dir, threshold, out); }; });

  auto* metrics = app.add_subcommand("metrics", "Similarity panel of two masks");
  std::string reference, prediction, id = "subject";
  metrics->add_option("--reference", reference)->required();
  metrics->add_option("--prediction", prediction)->required();
  metrics->add_option("--id", id);
  metrics->add_option("--out", out, "JSON or .csv output");
  metrics->callback([&] { run = [&] { return cmd_metrics(reference, prediction, id, out); }; });

  auto* pipe = app.add_subcommand("pipeline", "Segment, register, select atlases and build burden maps for a cohort");
  std::vector<double> thresholds;
  std::string pipe_strategy;
  pipe->add_option("--atlas-dir", atlas_dir);
  pipe->add_option("--cohort-dir", cohort_dir);
  pipe->add_option("--out", out);
  pipe->add_option("--strategy", pipe_strategy)->check(CLI::IsMember({"dice", "cc"}));
  pipe->add_option("--thresholds", thresholds);
  pipe->callback([&] { run = [&] { return cmd_pipeline(g, atlas_dir, cohort_dir, out, pipe_strategy, thresholds); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return run();
  } catch (const Error& e) {
    std::fprintf(stderr, "vqa: %s\n", e.what());
    return is_io(e.code()) ? kExitIo : kExitFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vqa: %s\n", e.what());
    return kExitFailure;
  }
}
