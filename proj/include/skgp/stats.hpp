#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace skgp {

enum class Comparison { Better, Worse, Indistinguishable };

inline std::string_view comparison_mark(Comparison c) {
  switch (c) {
    case Comparison::Better: return "+";
    case Comparison::Worse: return "-";
    default: return "=";
  }
}

struct WilcoxonResult {
  double w_plus = 0.0;   // rank sum of positive differences a - b
  double w_minus = 0.0;
  std::size_t n = 0;     // non-zero differences
  double z = 0.0;
  double p_value = 1.0;
  Comparison flag = Comparison::Indistinguishable;
};

/// Average ranks (1-based) of `values`; tied values share the mean of their
/// positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Two-sided paired signed-rank test of a against b. Zero differences are
/// dropped; the z score uses the tie-corrected variance without continuity
/// correction. `Better` means a is significantly lower.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: samples differ in length");
  if (a.size() < 6) throw std::invalid_argument("wilcoxon_signed_rank: need at least 6 pairs");
  std::vector<double> diff, mag;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) {
      diff.push_back(d);
      mag.push_back(std::fabs(d));
    }
  }
  WilcoxonResult r;
  r.n = diff.size();
  if (r.n == 0) return r;
  const auto ranks = average_ranks(mag);
  for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];

  const double n = static_cast<double>(r.n);
  double tie_term = 0.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return r;
  r.z = (r.w_plus - mean) / std::sqrt(var);
  r.p_value = std::erfc(std::fabs(r.z) / std::sqrt(2.0));
  if (r.p_value < alpha) r.flag = r.w_plus < mean ? Comparison::Better : Comparison::Worse;
  return r;
}

}  // namespace skgp
