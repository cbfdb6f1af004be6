#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skgp/surrogate.hpp"

namespace skgp {

struct CurvePoint {
  std::size_t evaluations = 0;
  double fitness = 0.0;
};

/// Test fitness against cumulative full evaluations. Read as a step function
/// of the best value seen so far; nothing is interpolated between points.
class ConvergenceCurve {
 public:
  ConvergenceCurve() = default;
  explicit ConvergenceCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (points_[i].evaluations <= points_[i - 1].evaluations)
        throw std::invalid_argument("ConvergenceCurve: evaluation counts must be strictly increasing");
  }

  const std::vector<CurvePoint>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

  bool covers(std::size_t at) const {
    return !points_.empty() && at >= points_.front().evaluations && at <= points_.back().evaluations;
  }

  // Best fitness among points with evaluations <= at.
  double best_at(std::size_t at) const {
    if (points_.empty() || at < points_.front().evaluations) throw std::out_of_range("ConvergenceCurve: no point at or before " + std::to_string(at));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points_) {
      if (p.evaluations > at) break;
      best = std::min(best, p.fitness);
    }
    return best;
  }

  // Earliest evaluation count whose point is at least as good as `level`.
  std::optional<std::size_t> first_reaching(double level) const {
    for (const auto& p : points_)
      if (p.fitness <= level) return p.evaluations;
    return std::nullopt;
  }

 private:
  std::vector<CurvePoint> points_;
};

/// Fraction of the budget `at` that `other` saves in matching the baseline.
///
/// The baseline's best-so-far at `at` is first reached at e_base; `other`
/// first reaches that quality at e*. The ratio is (e_base - e*) / at:
/// positive when other gets there sooner, negative when it lags, empty when it
/// never does. Identical curves give exactly 0.
inline std::optional<double> budget_saved_ratio(const ConvergenceCurve& baseline, const ConvergenceCurve& other, std::size_t at) {
  if (at == 0 || !baseline.covers(at) || !other.covers(at))
    throw std::invalid_argument("budget_saved_ratio: both curves must cover evaluation " + std::to_string(at));
  const double level = baseline.best_at(at);
  const auto e_base = baseline.first_reaching(level);
  const auto e_other = other.first_reaching(level);
  if (!e_other) return std::nullopt;
  return (static_cast<double>(*e_base) - static_cast<double>(*e_other)) / static_cast<double>(at);
}

struct ScoredOffspring {
  double estimate = 0.0;
  double truth = 0.0;
};

struct ExtraGain {
  std::size_t correctly_added = 0;
  std::size_t incorrectly_added = 0;

  friend bool operator==(const ExtraGain&, const ExtraGain&) = default;
};

/// Classifies the extra offspring (generated beyond the first |P|) that the
/// surrogate ranks within the top `cutoff` of the combined pool. An extra is
/// correctly added when its true fitness also ranks within the top `cutoff`.
/// Ranks break ties by position, base offspring first.
inline ExtraGain extra_offspring_gain(std::span<const ScoredOffspring> base, std::span<const ScoredOffspring> extra, std::size_t cutoff) {
  std::vector<double> est, truth;
  for (auto s : {base, extra})
    for (const auto& o : s) {
      est.push_back(o.estimate);
      truth.push_back(o.truth);
    }
  cutoff = std::min(cutoff, est.size());
  const auto by_est = stable_ranking(est);
  const auto by_truth = stable_ranking(truth);
  std::vector<bool> true_top(truth.size(), false);
  for (std::size_t k = 0; k < cutoff; ++k) true_top[by_truth[k]] = true;
  ExtraGain g;
  for (std::size_t k = 0; k < cutoff; ++k) {
    const std::size_t i = by_est[k];
    if (i < base.size()) continue;
    (true_top[i] ? g.correctly_added : g.incorrectly_added)++;
  }
  return g;
}

/// One row of a run log.
struct GenerationRecord {
  int generation = 0;
  double best_train_fitness = 0.0;
  std::optional<double> best_test_fitness;
  std::size_t full_evals_cumulative = 0;
  double wallclock_eval_s = 0.0;
  double wallclock_surrogate_s = 0.0;
  std::size_t unique_offspring = 0;
  std::size_t filled_duplicates = 0;
};

struct RunLog {
  std::string scenario;
  std::string algorithm;
  int repetition = 0;
  std::vector<GenerationRecord> records;

  // Test fitness of each generation's best-on-training individual.
  ConvergenceCurve curve() const {
    std::vector<CurvePoint> pts;
    for (const auto& r : records)
      if (r.best_test_fitness) pts.push_back({r.full_evals_cumulative, *r.best_test_fitness});
    return ConvergenceCurve(std::move(pts));
  }
};

struct TimingRow {
  std::string scenario;
  std::string algorithm;
  double mean_eval_s = 0.0;
  double mean_surrogate_s = 0.0;
  std::size_t generations = 0;  // records averaged
};

/// Mean per-generation evaluation and surrogate seconds per (scenario,
/// algorithm). Initialisation rows are left out when evolved generations exist.
inline std::vector<TimingRow> timing_report(std::span<const RunLog> logs) {
  std::map<std::pair<std::string, std::string>, TimingRow> rows;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& log : logs) {
    const auto key = std::make_pair(log.scenario, log.algorithm);
    auto [it, fresh] = rows.try_emplace(key, TimingRow{log.scenario, log.algorithm, 0.0, 0.0, 0});
    if (fresh) order.push_back(key);
    const bool evolved = std::any_of(log.records.begin(), log.records.end(), [](const auto& r) { return r.generation > 0; });
    for (const auto& r : log.records) {
      if (evolved && r.generation == 0) continue;
      it->second.mean_eval_s += r.wallclock_eval_s;
      it->second.mean_surrogate_s += r.wallclock_surrogate_s;
      ++it->second.generations;
    }
  }
  std::vector<TimingRow> out;
  for (const auto& key : order) {
    auto row = rows.at(key);
    if (row.generations > 0) {
      row.mean_eval_s /= static_cast<double>(row.generations);
      row.mean_surrogate_s /= static_cast<double>(row.generations);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace skgp
