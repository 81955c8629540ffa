#include <algorithm>
#include <cmath>
#include <numeric>

#include "vqa/error.hpp"
#include "vqa/mar.hpp"

namespace vqa {

namespace {

// 1-based average ranks of `v`.
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

constexpr int kExactMaxN = 25;

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired) {
  std::vector<double> d;
  for (const auto& [a, b] : paired) {
    const double x = a - b;
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "wilcoxon: non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  const int n = static_cast<int>(d.size());
  if (n < 5) throw Error(ErrorCode::TooFewPairs, "wilcoxon: " + std::to_string(n) + " non-zero differences, need 5");

  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::fabs(d[i]);
  const std::vector<double> rank = average_ranks(mag);

  WilcoxonResult r;
  r.n = n;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += rank[i];
  r.statistic = std::min(r.w_plus, r.w_minus);

  if (n <= kExactMaxN) {
    // Null distribution of the doubled positive-rank sum over all 2^n sign patterns.
    std::vector<long long> twice(d.size());
    long long total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) total += twice[i] = std::llround(2.0 * rank[i]);
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    long long reach = 0;
    for (long long t : twice) {
      for (long long s = reach; s >= 0; --s)
        if (ways[s] != 0.0) ways[s + t] += ways[s];
      reach += t;
    }
    const long long w2 = std::llround(2.0 * r.statistic);
    double tail = 0;
    for (long long s = 0; s <= w2; ++s) tail += ways[s];
    r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, n));
    r.exact = true;
    return r;
  }

  const double nn = n;
  const double mean = nn * (nn + 1) / 4.0;
  double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  const double z = (std::fabs(r.statistic - mean) - 0.5) / std::sqrt(var);
  r.p_value = z <= 0 ? 1.0 : std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.exact = false;
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, "spearman: lengths differ");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::DegenerateMarginals, "spearman: constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace vqa
