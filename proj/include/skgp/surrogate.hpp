#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "skgp/phenotype.hpp"

namespace skgp {

/// Sum of absolute rank differences. Vectors must have equal length.
inline std::int64_t manhattan(const PCVector& a, const PCVector& b) {
  if (a.ranks.size() != b.ranks.size()) throw std::invalid_argument("manhattan: PC vectors differ in length");
  std::int64_t d = 0;
  for (std::size_t i = 0; i < a.ranks.size(); ++i)
    d += std::abs(static_cast<std::int64_t>(a.ranks[i]) - static_cast<std::int64_t>(b.ranks[i]));
  return d;
}

/// One-nearest-neighbour fitness model over the PC vectors of a single
/// generation. Never spans generations: fitness values measured under
/// different evaluation seeds are not comparable.
class SurrogateDatabase {
 public:
  SurrogateDatabase(std::vector<PCVector> pcs, std::vector<double> fitness, int generation)
      : pcs_(std::move(pcs)), fitness_(std::move(fitness)), generation_(generation) {
    if (pcs_.size() != fitness_.size()) throw std::invalid_argument("SurrogateDatabase: PC and fitness counts differ");
    for (const auto& pc : pcs_)
      if (pc.size() != pcs_.front().size()) throw std::invalid_argument("SurrogateDatabase: PC vectors differ in length");
  }

  std::size_t size() const { return pcs_.size(); }
  bool empty() const { return pcs_.empty(); }
  int generation() const { return generation_; }
  const PCVector& pc(std::size_t i) const { return pcs_[i]; }
  double fitness(std::size_t i) const { return fitness_[i]; }

  // Index of the nearest entry; ties go to the lowest index.
  std::size_t nearest(const PCVector& query) const {
    if (pcs_.empty()) throw std::logic_error("SurrogateDatabase: estimate on an empty database");
    std::size_t best = 0;
    std::int64_t best_d = manhattan(pcs_[0], query);
    for (std::size_t i = 1; i < pcs_.size() && best_d > 0; ++i) {
      const auto d = manhattan(pcs_[i], query);
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    return best;
  }

  double estimate(const PCVector& query) const { return fitness_[nearest(query)]; }

  void dump_csv(std::ostream& out) const {
    out << "index,fitness";
    if (!pcs_.empty())
      for (std::size_t k = 0; k < pcs_.front().size(); ++k) out << ",pc" << k;
    out << '\n';
    for (std::size_t i = 0; i < pcs_.size(); ++i) {
      out << i << ',' << fitness_[i];
      for (auto r : pcs_[i].ranks) out << ',' << r;
      out << '\n';
    }
  }

 private:
  std::vector<PCVector> pcs_;
  std::vector<double> fitness_;
  int generation_ = 0;
};

inline double estimate(const SurrogateDatabase& db, const PCVector& pc) { return db.estimate(pc); }

// Indices sorted by (value, index).
inline std::vector<std::size_t> stable_ranking(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

/// Positions (in generation order) of the `target` offspring with the smallest
/// estimated fitness; equal estimates keep generation order.
inline std::vector<std::size_t> preselect(std::span<const double> estimates, std::size_t target) {
  auto idx = stable_ranking(estimates);
  if (idx.size() > target) idx.resize(target);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<std::size_t> preselect(const SurrogateDatabase& db, std::span<const PCVector> offspring, std::size_t target) {
  std::vector<double> est;
  est.reserve(offspring.size());
  for (const auto& pc : offspring) est.push_back(db.estimate(pc));
  return preselect(est, target);
}

/// |estimated top-cutoff ∩ true top-cutoff| / cutoff, ranking ties by index.
inline double precision_at(std::span<const double> estimated, std::span<const double> truth, std::size_t cutoff) {
  if (estimated.size() != truth.size()) throw std::invalid_argument("precision_at: size mismatch");
  if (cutoff == 0 || cutoff > estimated.size()) throw std::invalid_argument("precision_at: cutoff out of range");
  const auto est_rank = stable_ranking(estimated);
  const auto true_rank = stable_ranking(truth);
  std::vector<bool> in_true(truth.size(), false);
  for (std::size_t k = 0; k < cutoff; ++k) in_true[true_rank[k]] = true;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < cutoff; ++k) hits += in_true[est_rank[k]] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(cutoff);
}

}  // namespace skgp
