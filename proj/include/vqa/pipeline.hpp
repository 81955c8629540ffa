#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqa/mar.hpp"
#include "vqa/metrics.hpp"
#include "vqa/phantom.hpp"
#include "vqa/register.hpp"
#include "vqa/segment.hpp"
#include "vqa/wmhmap.hpp"

namespace vqa {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineConfig {
  std::filesystem::path atlas_dir;
  std::filesystem::path cohort_dir;
  std::filesystem::path out_dir;
  Strategy strategy = Strategy::VentricleDice;
  RegParams reg;
  SegmenterConfig seg;
  std::vector<double> thresholds{0.0, 0.6, 0.9};
  int workers = 1;
  std::uint64_t seed = 0;

  /// Thresholds ascending in [0, 1], workers >= 1, nested params valid.
  void validate() const;
  /// validate() plus existence of the atlas and cohort directories.
  void validate_paths() const;
};

nlohmann::json to_json(const RegParams& p);
nlohmann::json to_json(const SegmenterConfig& c);
nlohmann::json to_json(const PipelineConfig& c);
/// Keys present in `j` override `base`; unknown keys throw InvalidArgument.
RegParams reg_params_from_json(const nlohmann::json& j, RegParams base = {});
SegmenterConfig segmenter_config_from_json(const nlohmann::json& j, SegmenterConfig base = {});
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

/// One cohort subject as listed in the cohort manifest `truth.json`.
struct SubjectInput {
  std::string id;
  std::filesystem::path flair;
  std::filesystem::path brain;
  std::optional<std::filesystem::path> wmh;
  std::optional<std::filesystem::path> ventricles;  // reference labels, when known
  std::optional<std::string> generator_atlas;
  std::optional<double> age_param;
};

struct CohortManifest {
  std::vector<SubjectInput> subjects;
  std::optional<std::filesystem::path> wmh_general_truth;
};

CohortManifest read_cohort_manifest(const std::filesystem::path& dir);

/// Writes the atlas set under `dir/atlas`, every subject's images, masks and
/// true deformation, the general-space lesion truth and `truth.json`.
void write_phantom_dataset(const std::filesystem::path& dir, const AtlasSet& atlases,
                           const std::vector<PhantomSubject>& cohort, const Mask& wmh_general_truth,
                           std::uint64_t seed);

/// Everything the cohort reports need from one subject.
struct SubjectOutcome {
  std::string id;
  bool ok = false;
  std::string error;
  MarResult primary;    // under the configured strategy
  MarResult alternate;  // under the other strategy, same registrations
  Mask segmented;
  std::optional<MetricPanel> panel;  // reference ventricles vs segmentation
  std::optional<Mask> wmh_general;
  std::size_t ventricle_voxels = 0;
  std::optional<std::string> generator_atlas;

  double q_general() const;
  double q_selected() const;  // ventricle Dice of the selected atlas
};

/// Segmentation, MAR under both strategies and lesion warping for one subject.
SubjectOutcome process_subject(const std::string& id, const Volume& flair, const Mask& brain,
                               const std::optional<Mask>& wmh, const std::optional<Mask>& reference_ventricles,
                               const AtlasSet& atlases, const PipelineConfig& cfg);

struct ThresholdReport {
  double threshold = 0;
  int n_included = 0;
  std::optional<double> map_error;
  std::vector<std::string> flags;
};

struct CohortSummary {
  int n = 0;
  std::vector<std::string> completed;
  std::vector<std::pair<std::string, std::string>> failed;  // id, error
  double mean_gain = 0;
  std::optional<double> mean_gain_when_improvement;
  std::map<std::string, int> assignment_counts;
  std::optional<WilcoxonResult> wilcoxon;  // MAR quality vs direct general-atlas quality
  std::string wilcoxon_error;
  std::vector<ThresholdReport> thresholds;
};

/// Reports over outcomes sorted by id. Burden maps are built when lesion
/// masks are present; `truth` enables map_error.
CohortSummary summarize(const std::vector<SubjectOutcome>& outcomes, const AtlasSet& atlases,
                        const PipelineConfig& cfg, const std::optional<Volume>& truth = std::nullopt,
                        std::vector<BurdenMap>* maps = nullptr);

nlohmann::json to_json(const CohortSummary& s, Strategy strategy);
nlohmann::json to_json(const MarResult& r);

std::string gains_csv(const std::vector<SubjectOutcome>& outcomes);
std::string strategy_comparison_csv(const std::vector<SubjectOutcome>& outcomes);
std::string metrics_panel_csv(const std::vector<SubjectOutcome>& outcomes);

/// Reads the cohort, runs every subject on a pool of cfg.workers threads and
/// writes per-subject results, gains.csv, strategy_comparison.csv,
/// metrics_panel.csv, burden maps and summary.json under cfg.out_dir.
CohortSummary run_pipeline(const PipelineConfig& cfg);

/// Writes `run.json` (tool version, config echo, start and end timestamps).
void write_run_manifest(const std::filesystem::path& out_dir, const std::string& command,
                        const nlohmann::json& config, const std::string& started, const std::string& finished);
std::string utc_timestamp();

}  // namespace vqa
