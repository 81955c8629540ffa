#include "vqa/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vqa/kernels.hpp"

namespace vqa {

ConfusionCounts confusion(const Mask& reference, const Mask& prediction) {
  if (reference.dims() != prediction.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ");
  const auto c = kernels::confusion(reference.data(), prediction.data(), kernels::grid_of(reference.geometry()));
  return {c.tp, c.fp, c.fn, c.tn};
}

double dice(const ConfusionCounts& c) {
  const double denom = 2.0 * double(c.tp) + double(c.fp) + double(c.fn);
  return denom == 0 ? 1.0 : 2.0 * double(c.tp) / denom;
}

double jaccard(const ConfusionCounts& c) {
  const double denom = double(c.tp) + double(c.fp) + double(c.fn);
  return denom == 0 ? 1.0 : double(c.tp) / denom;
}

double tpr(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw Error(ErrorCode::EmptyReference, "true positive rate of an empty reference");
  return double(c.tp) / double(c.tp + c.fn);
}

double volumetric_similarity(const ConfusionCounts& c) {
  const double va = double(c.reference_volume()), vb = double(c.prediction_volume());
  if (va + vb == 0) return 1.0;
  return 1.0 - std::abs(va - vb) / (va + vb);
}

double mutual_information(const ConfusionCounts& c) {
  const double n = double(c.total());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "mutual information of empty masks");
  const double joint[2][2] = {{double(c.tn) / n, double(c.fp) / n}, {double(c.fn) / n, double(c.tp) / n}};
  const double pa[2] = {joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]};
  const double pb[2] = {joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]};
  double mi = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (joint[i][j] > 0) mi += joint[i][j] * std::log2(joint[i][j] / (pa[i] * pb[j]));
  return std::max(0.0, mi);
}

double cohen_kappa(const ConfusionCounts& c) {
  const double n = double(c.total());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "kappa of empty masks");
  const double po = double(c.tp + c.tn) / n;
  const double pa = double(c.reference_volume()) / n, pb = double(c.prediction_volume()) / n;
  const double pe = pa * pb + (1 - pa) * (1 - pb);
  if (pe >= 1.0) return c.fp + c.fn == 0 ? 1.0 : 0.0;
  return (po - pe) / (1 - pe);
}

double icc(const ConfusionCounts& c) {
  const double n = double(c.total());
  const double na = double(c.reference_volume()), nb = double(c.prediction_volume());
  const bool a_const = na == 0 || na == n, b_const = nb == 0 || nb == n;
  if (n == 0 || (a_const && b_const)) throw Error(ErrorCode::DegenerateMarginals, "both masks constant");
  // closed forms of the voxel sums for {0,1} data
  const double m = (na + nb) / (2 * n);
  const double cross = double(c.tp) - m * (na + nb) + n * m * m;
  const double ssa = na - 2 * m * na + n * m * m;
  const double ssb = nb - 2 * m * nb + n * m * m;
  return 2 * cross / (ssa + ssb);
}

double icc(const Mask& a, const Mask& b) { return icc(confusion(a, b)); }

namespace {
double pairs(std::uint64_t k) { return k < 2 ? 0.0 : double(k) * double(k - 1) / 2.0; }
}  // namespace

double adjusted_rand(const ConfusionCounts& c) {
  const std::uint64_t n = c.total();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "ARI needs at least two voxels");
  const double index = pairs(c.tp) + pairs(c.fp) + pairs(c.fn) + pairs(c.tn);
  const double sum_a = pairs(c.tp + c.fn) + pairs(c.fp + c.tn);
  const double sum_b = pairs(c.tp + c.fp) + pairs(c.fn + c.tn);
  const double expected = sum_a * sum_b / pairs(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0) {
    // only reachable when both partitions are a single cluster, i.e. identical
    return 1.0;
  }
  return (index - expected) / denom;
}

double pbd_rescaled(const ConfusionCounts& c) {
  const double err = double(c.fp) + double(c.fn);
  if (c.tp == 0) return err == 0 ? 1.0 : 0.0;
  const double pbd = err / (2.0 * double(c.tp));
  return 1.0 / (1.0 + pbd);
}

RegionErrors der_oer(const Mask& a, const Mask& b, Connectivity connectivity) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ");
  const std::size_t va = count(a), vb = count(b);
  if (va + vb == 0) return {};
  const double mta = 0.5 * double(va + vb);

  const Components ca = connected_components(a, connectivity);
  const Components cb = connected_components(b, connectivity);
  std::vector<char> matched_a(ca.count(), 0), matched_b(cb.count(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) {
      matched_a[std::size_t(ca.labels[i] - 1)] = 1;
      matched_b[std::size_t(cb.labels[i] - 1)] = 1;
    }
  }

  double unmatched = 0;
  for (std::size_t l = 0; l < ca.count(); ++l)
    if (!matched_a[l]) unmatched += double(ca.sizes[l]);
  for (std::size_t l = 0; l < cb.count(); ++l)
    if (!matched_b[l]) unmatched += double(cb.sizes[l]);

  // symmetric difference between the matched supports
  double outline = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] && matched_a[std::size_t(ca.labels[i] - 1)];
    const bool in_b = b[i] && matched_b[std::size_t(cb.labels[i] - 1)];
    outline += in_a != in_b;
  }
  return {unmatched / mta, outline / mta};
}

}  // namespace vqa
