#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vqa/components.hpp"
#include "vqa/volume.hpp"

namespace vqa {

/// Voxel counts of a reference mask `a` against a prediction `b`.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  std::uint64_t reference_volume() const { return tp + fn; }
  std::uint64_t prediction_volume() const { return tp + fp; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const Mask& reference, const Mask& prediction);

// Overlap metrics; empty-vs-empty counts as perfect agreement.
double dice(const ConfusionCounts& c);
double jaccard(const ConfusionCounts& c);
/// Throws EmptyReference when the reference is empty.
double tpr(const ConfusionCounts& c);
/// 1 - |Va - Vb| / (Va + Vb).
double volumetric_similarity(const ConfusionCounts& c);
/// Mutual information of the two binary label variables, in bits.
double mutual_information(const ConfusionCounts& c);
/// Cohen's kappa. When chance agreement is 1 (both masks constant) returns
/// 1 for equal masks and 0 otherwise.
double cohen_kappa(const ConfusionCounts& c);

/// Two-rater ICC with the grand mean of both masks, voxels as subjects.
/// Throws DegenerateMarginals when both masks are constant.
double icc(const ConfusionCounts& c);
double icc(const Mask& a, const Mask& b);

/// Adjusted Rand index of the two binary partitions. Throws
/// DegenerateMarginals when both partitions are trivial and differ.
double adjusted_rand(const ConfusionCounts& c);

/// Binary probabilistic distance (fp + fn) / (2 tp) reported as 1 / (1 + PBD).
double pbd_rescaled(const ConfusionCounts& c);

/// Detection and outline error rates, normalized by the mean total area.
struct RegionErrors {
  double der = 0;  // in [0, 2]
  double oer = 0;  // in [0, 2]
};

/// A region counts as detected in both when it overlaps at least one voxel
/// of the other mask. Both-empty gives (0, 0).
RegionErrors der_oer(const Mask& a, const Mask& b, Connectivity connectivity = Connectivity::TwentySix);

/// Rescaled similarity panel; every entry lies in [0, 1].
struct MetricPanel {
  std::optional<double> dice, jaccard, tpr, vs, mi, ari, icc, pbd, kap, der, oer;

  static constexpr int kSize = 11;
  static const std::vector<std::string>& keys();
  /// Entries in `keys()` order.
  std::vector<std::optional<double>> values() const;
  std::vector<std::string> flags;
};

/// Assembles the eleven metrics. MI is reported as 2 MI / (H(a) + H(b));
/// kappa, ICC and ARI are clamped below at 0; PBD as 1 / (1 + PBD);
/// DER/OER as 1 - x / 2. Identical masks score 1 on every entry. A metric
/// that cannot be evaluated is left empty and named in `flags`.
MetricPanel metric_panel(const Mask& reference, const Mask& prediction,
                         Connectivity connectivity = Connectivity::TwentySix);

/// CSV header `id,dice,...,oer`.
std::string panel_csv_header();
std::string panel_csv_row(const std::string& id, const MetricPanel& p);

}  // namespace vqa
