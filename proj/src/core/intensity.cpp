#include "vqa/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vqa {

float percentile_nearest_rank(std::span<const float> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty set");
  std::vector<float> sorted(values.begin(), values.end());
  const double n = double(sorted.size());
  // guard against q * n landing a hair above an integer
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(rank - 1), sorted.end());
  return sorted[rank - 1];
}

Volume percentile_normalize(const Volume& v) {
  if (v.size() < 100) throw Error(ErrorCode::InvalidArgument, "percentile normalization needs >= 100 voxels");
  const double p1 = percentile_nearest_rank(v.data(), 0.01);
  const double p99 = percentile_nearest_rank(v.data(), 0.99);
  if (p99 - p1 < 1e-12) throw Error(ErrorCode::DegenerateIntensityRange, "99th percentile equals 1st percentile");
  Volume out(v.geometry());
  const double scale = 1.0 / (p99 - p1);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = float((double(v[i]) - p1) * scale);
  return out;
}

Volume minmax_rescale(const Volume& v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "empty volume");
  const auto [lo_it, hi_it] = std::minmax_element(v.data().begin(), v.data().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorCode::DegenerateIntensityRange, "constant volume");
  Volume out(v.geometry());
  const double range = hi - lo;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = float((double(v[i]) - lo) / range);
  return out;
}

Volume robust_rescale(const Volume& v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "empty volume");
  double mean = 0;
  for (float x : v.data()) mean += x;
  mean /= double(v.size());
  std::vector<float> low, high;
  for (float x : v.data()) (x > mean ? high : low).push_back(x);
  if (low.empty() || high.empty()) throw Error(ErrorCode::DegenerateIntensityRange, "constant volume");
  const auto median = [](std::vector<float>& xs) {
    const auto mid = xs.begin() + std::ptrdiff_t((xs.size() - 1) / 2);
    std::nth_element(xs.begin(), mid, xs.end());
    return double(*mid);
  };
  const double lo = median(low), hi = median(high);
  if (!(hi - lo > 1e-12)) throw Error(ErrorCode::DegenerateIntensityRange, "no contrast between image classes");
  Volume out(v.geometry());
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = float((double(v[i]) - lo) * scale);
  return out;
}

double masked_mean(const Volume& v, const Mask& mask) {
  if (v.dims() != mask.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ from volume");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) {
      sum += v[i];
      ++n;
    }
  if (n == 0) throw Error(ErrorCode::EmptyBrainMask, "mean over empty mask");
  return sum / double(n);
}

double masked_median(const Volume& v, const Mask& mask) {
  if (v.dims() != mask.dims()) throw Error(ErrorCode::DimMismatch, "mask dims differ from volume");
  std::vector<float> inside;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) inside.push_back(v[i]);
  if (inside.empty()) throw Error(ErrorCode::EmptyBrainMask, "median over empty mask");
  const std::size_t mid = (inside.size() - 1) / 2;
  std::nth_element(inside.begin(), inside.begin() + std::ptrdiff_t(mid), inside.end());
  return inside[mid];
}

}  // namespace vqa
