#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vqa/metrics.hpp"

namespace vqa {

const std::vector<std::string>& MetricPanel::keys() {
  static const std::vector<std::string> k{"dice", "jaccard", "tpr", "vs",  "mi", "ari",
                                          "icc",  "pbd",     "kap", "der", "oer"};
  return k;
}

std::vector<std::optional<double>> MetricPanel::values() const {
  return {dice, jaccard, tpr, vs, mi, ari, icc, pbd, kap, der, oer};
}

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double entropy_bits(double p) {
  double h = 0;
  if (p > 0) h -= p * std::log2(p);
  if (p < 1) h -= (1 - p) * std::log2(1 - p);
  return h;
}

// 2 MI / (H(a) + H(b)): 1 for identical masks, 0 for independent ones.
double normalized_mutual_information(const ConfusionCounts& c) {
  const double n = double(c.total());
  const double h = entropy_bits(double(c.reference_volume()) / n) + entropy_bits(double(c.prediction_volume()) / n);
  if (h <= 0) return 1.0;
  return clamp01(2.0 * mutual_information(c) / h);
}

template <class F>
std::optional<double> guarded(const char* name, std::vector<std::string>& flags, F f) {
  try {
    return f();
  } catch (const Error& e) {
    flags.push_back(std::string(name) + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

MetricPanel metric_panel(const Mask& reference, const Mask& prediction, Connectivity connectivity) {
  const ConfusionCounts c = confusion(reference, prediction);
  const bool identical = c.fp == 0 && c.fn == 0;
  MetricPanel p;
  p.dice = dice(c);
  p.jaccard = jaccard(c);
  p.tpr = guarded("tpr", p.flags, [&] { return identical ? 1.0 : tpr(c); });
  p.vs = volumetric_similarity(c);
  p.mi = identical ? 1.0 : normalized_mutual_information(c);
  p.ari = guarded("ari", p.flags, [&] { return clamp01(adjusted_rand(c)); });
  p.icc = guarded("icc", p.flags, [&] { return identical ? 1.0 : clamp01(icc(c)); });
  p.pbd = pbd_rescaled(c);
  p.kap = clamp01(cohen_kappa(c));
  const RegionErrors re = der_oer(reference, prediction, connectivity);
  p.der = 1.0 - re.der / 2.0;
  p.oer = 1.0 - re.oer / 2.0;
  return p;
}

std::string panel_csv_header() {
  std::string h = "id";
  for (const auto& k : MetricPanel::keys()) h += "," + k;
  return h;
}

std::string panel_csv_row(const std::string& id, const MetricPanel& p) {
  std::string row = id;
  char buf[32];
  for (const auto& v : p.values()) {
    row += ",";
    if (v) {
      std::snprintf(buf, sizeof buf, "%.12g", *v);
      row += buf;
    }
  }
  return row;
}

}  // namespace vqa
