#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqa/register.hpp"
#include "vqa/transform.hpp"
#include "vqa/volume.hpp"

namespace vqa {

enum class AgeBand { Under70, From70To75, From75To80, From80To85, Over85, General };

std::string_view to_string(AgeBand band);
AgeBand age_band_from_string(std::string_view s);
/// 1 (youngest) .. 5 (oldest); the general atlas ranks 3, the middle band.
int age_rank(AgeBand band);

struct Atlas {
  std::string id;
  AgeBand age_band = AgeBand::General;
  Volume image;
  Transform to_general;    // T_{a,g}, on the general grid: warp(image, to_general) ~ general image
  Transform from_general;  // T^-1_{a,g}, on this atlas's grid
  std::optional<Mask> ventricles;  // known labels (phantom atlases)
  std::optional<Mask> brain;

  bool is_general() const { return age_band == AgeBand::General; }
};

/// Age-specific atlases a1..a5 plus the general atlas g with its ventricle labels V_g.
struct AtlasSet {
  std::vector<Atlas> atlases;
  Mask ventricles_general;

  const Atlas& general() const;
  const Atlas& by_id(const std::string& id) const;
  /// Throws InvalidArgument unless there is exactly one general atlas and V_g is non-empty.
  void validate() const;
};

enum class Strategy { VentricleDice, CrossCorrelation };
std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);  // "dice" | "cc"

/// V_{x,a,g}: V_g pulled through T^-1_{a,g} then T^-1_{x,a} in one nearest-neighbour resampling.
Mask propagate_ventricles(const AtlasSet& s, const Atlas& a, const Registration& subject_to_atlas,
                          const Geometry& subject_grid);

inline constexpr const char* kVentriclesNotIdentifiable = "ventricles not identifiable";

/// Dice of the segmented and propagated ventricles. Both empty gives 0 and
/// appends kVentriclesNotIdentifiable to `flags`.
double quality_dice(const Mask& segmented, const Mask& propagated, std::vector<std::string>* flags = nullptr);

/// One subject registered against one atlas.
struct AtlasOutcome {
  std::string atlas_id;
  std::optional<Registration> registration;  // empty when registration failed
  std::optional<double> dice_quality;
  std::optional<double> cc_quality;
  std::vector<std::string> warnings;
};

/// All per-atlas registrations of one subject, in atlas-set order.
struct MarEvaluation {
  std::vector<AtlasOutcome> outcomes;
};

MarEvaluation evaluate_atlases(const Volume& image, const Mask& segmented_ventricles, const AtlasSet& s,
                               const RegParams& p);

struct MarResult {
  Strategy strategy = Strategy::VentricleDice;
  std::map<std::string, std::optional<double>> per_atlas_quality;  // under `strategy`
  std::map<std::string, std::optional<double>> dice_quality;       // always recorded
  std::map<std::string, std::optional<double>> cc_quality;
  std::string selected;
  std::string general_id;
  Transform final_transform;  // subject -> general space, on the general grid
  double gain = 0;            // dice_quality[selected] - dice_quality[general]
  std::vector<std::string> flags;
};

/// argmax over non-null qualities; ties go to the general atlas, then to the
/// younger age band. Throws AllRegistrationsFailed when every entry is null.
std::string select_atlas(const std::map<std::string, std::optional<double>>& quality, const AtlasSet& s);

MarResult finalize_mar(const MarEvaluation& e, const AtlasSet& s, Strategy strategy);

MarResult run_mar(const Volume& image, const Mask& segmented_ventricles, const AtlasSet& s, const RegParams& p,
                  Strategy strategy);

/// Q_b - Q_g in ventricle Dice; 0 when b = g. Throws MissingGeneralQuality.
double gain(const MarResult& r);

struct WilcoxonResult {
  double statistic = 0;  // min(W+, W-)
  double w_plus = 0;
  double w_minus = 0;
  double p_value = 1;  // two-sided
  int n = 0;           // non-zero differences
  bool exact = false;
};

/// Two-sided signed-rank test on (first - second). Zero differences are
/// dropped and tied magnitudes share average ranks. Exact null distribution
/// for n <= 25, normal approximation with continuity and tie corrections
/// above. Throws TooFewPairs when fewer than 5 differences are non-zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Voxelwise mean of pre-aligned volumes on one grid.
Volume build_general_atlas(std::span<const Volume> aligned);

void write_atlas_set(const AtlasSet& s, const std::filesystem::path& dir);
AtlasSet read_atlas_set(const std::filesystem::path& dir);

}  // namespace vqa
