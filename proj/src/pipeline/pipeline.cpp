#include "vqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "vqa/error.hpp"
#include "vqa/intensity.hpp"
#include "vqa/nifti.hpp"
#include "vqa/transform_io.hpp"

namespace vqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json quality_json(const std::map<std::string, std::optional<double>>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = optional_json(v);
  return j;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  out << s;
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* kk : known) ok = ok || k == kk;
    if (!ok) throw Error(ErrorCode::InvalidArgument, std::string(where) + ": unknown key '" + k + "'");
  }
}

Strategy other(Strategy s) {
  return s == Strategy::VentricleDice ? Strategy::CrossCorrelation : Strategy::VentricleDice;
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

}  // namespace

void PipelineConfig::validate() const {
  reg.validate();
  seg.validate();
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0 && thresholds[i] <= 1))
      throw Error(ErrorCode::InvalidArgument, "thresholds must lie in [0, 1]");
    if (i > 0 && thresholds[i] < thresholds[i - 1])
      throw Error(ErrorCode::InvalidArgument, "thresholds must be sorted ascending");
  }
}

void PipelineConfig::validate_paths() const {
  validate();
  if (!fs::is_directory(atlas_dir)) throw Error(ErrorCode::IoFailure, "atlas dir not found: " + atlas_dir.string());
  if (!fs::is_directory(cohort_dir)) throw Error(ErrorCode::IoFailure, "cohort dir not found: " + cohort_dir.string());
}

json to_json(const RegParams& p) {
  return json{{"pyramid_levels", p.pyramid_levels}, {"iters_per_level", p.iters_per_level},
              {"update_step", p.update_step},       {"fluid_sigma", p.fluid_sigma},
              {"diffusion_sigma", p.diffusion_sigma}, {"affine_iters", p.affine_iters},
              {"affine_lr", p.affine_lr},           {"convergence_tol", p.convergence_tol}};
}

json to_json(const SegmenterConfig& c) {
  return json{{"dark_threshold", c.dark_threshold},
              {"min_component_voxels", c.min_component_voxels},
              {"binarize_level", c.binarize_level},
              {"connectivity", static_cast<int>(c.connectivity)},
              {"border_erosion", c.border_erosion},
              {"resize_for_network", c.resize_for_network},
              {"network_dims", c.network_dims}};
}

json to_json(const PipelineConfig& c) {
  return json{{"atlas_dir", c.atlas_dir.string()},
              {"cohort_dir", c.cohort_dir.string()},
              {"out_dir", c.out_dir.string()},
              {"strategy", to_string(c.strategy)},
              {"reg", to_json(c.reg)},
              {"seg", to_json(c.seg)},
              {"thresholds", c.thresholds},
              {"workers", c.workers},
              {"seed", c.seed}};
}

RegParams reg_params_from_json(const json& j, RegParams p) {
  reject_unknown(j,
                 {"pyramid_levels", "iters_per_level", "update_step", "fluid_sigma", "diffusion_sigma",
                  "affine_iters", "affine_lr", "convergence_tol"},
                 "reg");
  try {
    take(j, "pyramid_levels", p.pyramid_levels);
    take(j, "iters_per_level", p.iters_per_level);
    take(j, "update_step", p.update_step);
    take(j, "fluid_sigma", p.fluid_sigma);
    take(j, "diffusion_sigma", p.diffusion_sigma);
    take(j, "affine_iters", p.affine_iters);
    take(j, "affine_lr", p.affine_lr);
    take(j, "convergence_tol", p.convergence_tol);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("reg: ") + e.what());
  }
  p.validate();
  return p;
}

SegmenterConfig segmenter_config_from_json(const json& j, SegmenterConfig c) {
  reject_unknown(j,
                 {"dark_threshold", "min_component_voxels", "binarize_level", "connectivity", "border_erosion",
                  "resize_for_network", "network_dims"},
                 "seg");
  try {
    take(j, "dark_threshold", c.dark_threshold);
    take(j, "min_component_voxels", c.min_component_voxels);
    take(j, "binarize_level", c.binarize_level);
    if (j.contains("connectivity")) c.connectivity = connectivity_from_int(j["connectivity"].get<int>());
    take(j, "border_erosion", c.border_erosion);
    take(j, "resize_for_network", c.resize_for_network);
    take(j, "network_dims", c.network_dims);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("seg: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  reject_unknown(j, {"atlas_dir", "cohort_dir", "out_dir", "strategy", "reg", "seg", "thresholds", "workers", "seed"},
                 "config");
  try {
    if (j.contains("atlas_dir")) c.atlas_dir = j["atlas_dir"].get<std::string>();
    if (j.contains("cohort_dir")) c.cohort_dir = j["cohort_dir"].get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("strategy")) c.strategy = strategy_from_string(j["strategy"].get<std::string>());
    if (j.contains("reg")) c.reg = reg_params_from_json(j["reg"], c.reg);
    if (j.contains("seg")) c.seg = segmenter_config_from_json(j["seg"], c.seg);
    take(j, "thresholds", c.thresholds);
    take(j, "workers", c.workers);
    take(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void write_phantom_dataset(const fs::path& dir, const AtlasSet& atlases, const std::vector<PhantomSubject>& cohort,
                           const Mask& wmh_general_truth, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  write_atlas_set(atlases, dir / "atlas");
  write_nifti_mask(wmh_general_truth, dir / "wmh_general_truth.nii");
  json subjects = json::array();
  for (const auto& s : cohort) {
    write_nifti(s.flair, dir / (s.id + "_flair.nii"));
    write_nifti_mask(s.brain, dir / (s.id + "_brain.nii"));
    write_nifti_mask(s.ventricles, dir / (s.id + "_ventricles.nii"));
    write_nifti_mask(s.wmh, dir / (s.id + "_wmh.nii"));
    json e{{"id", s.id},
           {"flair", s.id + "_flair.nii"},
           {"brain", s.id + "_brain.nii"},
           {"ventricles", s.id + "_ventricles.nii"},
           {"wmh", s.id + "_wmh.nii"},
           {"generator_atlas", s.generator_atlas ? json(*s.generator_atlas) : json(nullptr)},
           {"age_param", s.age_param}};
    if (s.true_deformation) {
      const std::string prefix = s.id + "_deform";
      const Geometry& grid = s.flair.geometry();
      write_transform_pair({s.true_deformation->forward_transform(), s.true_deformation->inverse_transform(),
                            json{{"squaring_steps", s.true_deformation->squaring_steps}}},
                           dir, prefix, grid, grid);
      json files = json::array();
      for (const char* suffix : {"_fx", "_fy", "_fz", "_ix", "_iy", "_iz"}) files.push_back(prefix + suffix + ".nii");
      e["deformation"] = {{"prefix", prefix}, {"files", files}};
    }
    subjects.push_back(std::move(e));
  }
  write_text(dir / "truth.json", json{{"seed", seed},
                                      {"n", cohort.size()},
                                      {"atlas_dir", "atlas"},
                                      {"wmh_general_truth", "wmh_general_truth.nii"},
                                      {"subjects", subjects}}
                                     .dump(2) +
                                     "\n");
}

CohortManifest read_cohort_manifest(const fs::path& dir) {
  std::ifstream in(dir / "truth.json");
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + (dir / "truth.json").string());
  CohortManifest m;
  try {
    const json j = json::parse(in);
    for (const auto& s : j.at("subjects")) {
      SubjectInput e;
      e.id = s.at("id").get<std::string>();
      e.flair = resolve(dir, s.at("flair").get<std::string>());
      e.brain = resolve(dir, s.at("brain").get<std::string>());
      if (s.contains("wmh")) e.wmh = resolve(dir, s["wmh"].get<std::string>());
      if (s.contains("ventricles")) e.ventricles = resolve(dir, s["ventricles"].get<std::string>());
      if (s.contains("generator_atlas") && !s["generator_atlas"].is_null())
        e.generator_atlas = s["generator_atlas"].get<std::string>();
      if (s.contains("age_param")) e.age_param = s["age_param"].get<double>();
      m.subjects.push_back(std::move(e));
    }
    if (j.contains("wmh_general_truth")) m.wmh_general_truth = resolve(dir, j["wmh_general_truth"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, "truth.json: " + std::string(e.what()));
  }
  std::sort(m.subjects.begin(), m.subjects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < m.subjects.size(); ++i)
    if (m.subjects[i].id == m.subjects[i - 1].id)
      throw Error(ErrorCode::InvalidArgument, "duplicate subject id '" + m.subjects[i].id + "'");
  return m;
}

double SubjectOutcome::q_general() const { return primary.dice_quality.at(primary.general_id).value(); }

double SubjectOutcome::q_selected() const { return primary.dice_quality.at(primary.selected).value(); }

SubjectOutcome process_subject(const std::string& id, const Volume& flair, const Mask& brain,
                               const std::optional<Mask>& wmh, const std::optional<Mask>& reference_ventricles,
                               const AtlasSet& atlases, const PipelineConfig& cfg) {
  SubjectOutcome o;
  o.id = id;
  o.segmented = rule_based_ventricle_segment(flair, brain, cfg.seg);
  o.ventricle_voxels = count(o.segmented);
  if (reference_ventricles) o.panel = metric_panel(*reference_ventricles, o.segmented);
  const Volume x = percentile_normalize(flair);
  const MarEvaluation e = evaluate_atlases(x, o.segmented, atlases, cfg.reg);
  o.primary = finalize_mar(e, atlases, cfg.strategy);
  o.alternate = finalize_mar(e, atlases, other(cfg.strategy));
  if (!o.primary.dice_quality.at(o.primary.general_id) || !o.primary.dice_quality.at(o.primary.selected))
    throw Error(ErrorCode::MissingGeneralQuality, "subject " + id + ": ventricle quality unavailable");
  if (wmh) o.wmh_general = warp_wmh(*wmh, o.primary.final_transform, atlases.general().image.geometry());
  o.ok = true;
  return o;
}

CohortSummary summarize(const std::vector<SubjectOutcome>& outcomes_in, const AtlasSet& atlases,
                        const PipelineConfig& cfg, const std::optional<Volume>& truth, std::vector<BurdenMap>* maps) {
  std::vector<const SubjectOutcome*> outcomes;
  for (const auto& o : outcomes_in) outcomes.push_back(&o);
  std::sort(outcomes.begin(), outcomes.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  CohortSummary s;
  s.n = static_cast<int>(outcomes.size());
  for (const auto& a : atlases.atlases) s.assignment_counts[a.id] = 0;
  std::vector<std::pair<double, double>> pairs;
  double gain_sum = 0, improved_sum = 0;
  int improved = 0;
  std::vector<BurdenEntry> entries;
  for (const auto* o : outcomes) {
    if (!o->ok) {
      s.failed.emplace_back(o->id, o->error);
      continue;
    }
    s.completed.push_back(o->id);
    ++s.assignment_counts[o->primary.selected];
    gain_sum += o->primary.gain;
    if (o->primary.gain > 0) {
      improved_sum += o->primary.gain;
      ++improved;
    }
    pairs.emplace_back(o->q_selected(), o->q_general());
    if (o->wmh_general) entries.push_back({*o->wmh_general, o->q_selected()});
  }
  if (!s.completed.empty()) s.mean_gain = gain_sum / static_cast<double>(s.completed.size());
  if (improved > 0) s.mean_gain_when_improvement = improved_sum / improved;
  try {
    s.wilcoxon = wilcoxon_signed_rank(pairs);
  } catch (const Error& e) {
    s.wilcoxon_error = e.what();
  }

  const Geometry& g = atlases.general().image.geometry();
  for (double t : cfg.thresholds) {
    ThresholdReport r;
    r.threshold = t;
    if (entries.empty()) {
      r.flags.emplace_back("no lesion masks");
    } else {
      BurdenMap b = build_burden_map(entries, t, g);
      r.n_included = b.n_included;
      r.flags = b.flags;
      if (truth) r.map_error = map_error(b, *truth);
      if (maps) maps->push_back(std::move(b));
    }
    s.thresholds.push_back(std::move(r));
  }
  return s;
}

json to_json(const MarResult& r) {
  return json{{"strategy", to_string(r.strategy)},
              {"selected", r.selected},
              {"general", r.general_id},
              {"gain", r.gain},
              {"per_atlas_quality", quality_json(r.per_atlas_quality)},
              {"dice_quality", quality_json(r.dice_quality)},
              {"cc_quality", quality_json(r.cc_quality)},
              {"flags", r.flags}};
}

json to_json(const CohortSummary& s, Strategy strategy) {
  json j;
  j["strategy"] = to_string(strategy);
  j["n"] = s.n;
  j["n_completed"] = s.completed.size();
  j["n_failed"] = s.failed.size();
  j["completed"] = s.completed;
  j["failed"] = json::array();
  for (const auto& [id, err] : s.failed) j["failed"].push_back({{"id", id}, {"error", err}});
  j["mean_gain"] = s.mean_gain;
  j["mean_gain_when_improvement"] = optional_json(s.mean_gain_when_improvement);
  j["assignment_counts"] = s.assignment_counts;
  if (s.wilcoxon) {
    j["wilcoxon"] = {{"statistic", s.wilcoxon->statistic}, {"w_plus", s.wilcoxon->w_plus},
                     {"w_minus", s.wilcoxon->w_minus},     {"p_value", s.wilcoxon->p_value},
                     {"n", s.wilcoxon->n},                 {"exact", s.wilcoxon->exact}};
  } else {
    j["wilcoxon"] = {{"error", s.wilcoxon_error}};
  }
  j["burden_maps"] = json::array();
  for (const auto& t : s.thresholds)
    j["burden_maps"].push_back({{"threshold", t.threshold},
                                {"n_included", t.n_included},
                                {"map_error", optional_json(t.map_error)},
                                {"flags", t.flags}});
  return j;
}

std::string gains_csv(const std::vector<SubjectOutcome>& outcomes) {
  std::ostringstream out;
  out << "id,q_g,q_b,selected,gain\n";
  for (const auto& o : outcomes)
    if (o.ok)
      out << o.id << ',' << fmt(o.q_general()) << ',' << fmt(o.q_selected()) << ',' << o.primary.selected << ','
          << fmt(o.primary.gain) << '\n';
  return out.str();
}

std::string strategy_comparison_csv(const std::vector<SubjectOutcome>& outcomes) {
  std::ostringstream out;
  out << "id,q_g,selected_dice,gain_dice,selected_cc,gain_cc\n";
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    const MarResult& d = o.primary.strategy == Strategy::VentricleDice ? o.primary : o.alternate;
    const MarResult& c = o.primary.strategy == Strategy::VentricleDice ? o.alternate : o.primary;
    out << o.id << ',' << fmt(o.q_general()) << ',' << d.selected << ',' << fmt(d.gain) << ',' << c.selected << ','
        << fmt(c.gain) << '\n';
  }
  return out.str();
}

std::string metrics_panel_csv(const std::vector<SubjectOutcome>& outcomes) {
  std::string out = panel_csv_header() + "\n";
  for (const auto& o : outcomes)
    if (o.ok && o.panel) out += panel_csv_row(o.id, *o.panel) + "\n";
  return out;
}

CohortSummary run_pipeline(const PipelineConfig& cfg) {
  cfg.validate_paths();
  const AtlasSet atlases = read_atlas_set(cfg.atlas_dir);
  const CohortManifest manifest = read_cohort_manifest(cfg.cohort_dir);
  if (manifest.subjects.empty()) throw Error(ErrorCode::EmptyList, "cohort manifest lists no subjects");
  std::error_code ec;
  fs::create_directories(cfg.out_dir / "subjects", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + cfg.out_dir.string() + ": " + ec.message());

  std::vector<SubjectOutcome> outcomes(manifest.subjects.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < manifest.subjects.size(); i = next++) {
      const SubjectInput& in = manifest.subjects[i];
      SubjectOutcome& o = outcomes[i];
      try {
        const Volume flair = read_nifti(in.flair);
        const Mask brain = read_nifti_mask(in.brain);
        std::optional<Mask> wmh, vents;
        if (in.wmh) wmh = read_nifti_mask(*in.wmh);
        if (in.ventricles) vents = read_nifti_mask(*in.ventricles);
        o = process_subject(in.id, flair, brain, wmh, vents, atlases, cfg);
        o.generator_atlas = in.generator_atlas;
        const fs::path sd = cfg.out_dir / "subjects" / in.id;
        fs::create_directories(sd);
        json mr = to_json(o.primary);
        mr["final_transform"] = {"final_fx.nii", "final_fy.nii", "final_fz.nii"};
        write_text(sd / "mar_result.json", mr.dump(2) + "\n");
        write_field(to_field(o.primary.final_transform, atlases.general().image.geometry()), sd, "final_f");
        write_nifti_mask(o.segmented, sd / "ventricles_seg.nii");
        if (o.wmh_general) write_nifti_mask(*o.wmh_general, sd / "wmh_general.nii");
        o.primary.final_transform = Transform::identity();
        o.alternate.final_transform = Transform::identity();
      } catch (const std::exception& e) {
        o = SubjectOutcome{};
        o.id = in.id;
        o.ok = false;
        o.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(manifest.subjects.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::optional<Volume> truth;
  if (manifest.wmh_general_truth) truth = to_volume(read_nifti_mask(*manifest.wmh_general_truth));
  std::vector<BurdenMap> maps;
  CohortSummary s = summarize(outcomes, atlases, cfg, truth, &maps);

  write_text(cfg.out_dir / "gains.csv", gains_csv(outcomes));
  write_text(cfg.out_dir / "strategy_comparison.csv", strategy_comparison_csv(outcomes));
  write_text(cfg.out_dir / "metrics_panel.csv", metrics_panel_csv(outcomes));
  for (const auto& b : maps) {
    const std::string stem = "burden_T" + fmt(b.threshold);
    write_nifti(b.map, cfg.out_dir / (stem + ".nii"));
    write_text(cfg.out_dir / (stem + ".json"),
               json{{"threshold", b.threshold}, {"n_included", b.n_included}, {"n_total", b.n_total},
                    {"flags", b.flags}}
                       .dump(2) +
                   "\n");
  }
  write_text(cfg.out_dir / "summary.json", to_json(s, cfg.strategy).dump(2) + "\n");
  return s;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                        const std::string& started, const std::string& finished) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  json j{{"tool", "vqa"},  {"version", kToolVersion}, {"command", command},
         {"config", config}, {"started", started},      {"finished", finished}};
  write_text(out_dir / "run.json", j.dump(2) + "\n");
}

}  // namespace vqa
