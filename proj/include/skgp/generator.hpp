#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "skgp/error.hpp"
#include "skgp/project.hpp"
#include "skgp/random.hpp"

namespace skgp {

struct ScenarioConfig {
  int activity_count = 30;
  int modes_per_activity = 3;
  int resource_type_count = 4;
  double target_order_strength = 0.5;
  double order_strength_tolerance = 0.05;
  double optimistic_multiplier = 0.8;
  double pessimistic_multiplier = 1.4;
  double capacity_tightness = 1.0;
  int instances_per_evaluation = 5;
  int min_base_duration = 3;
  int max_base_duration = 15;

  void validate() const {
    if (activity_count < 1) throw ConfigError("scenario.activity_count: must be positive");
    if (modes_per_activity < 1) throw ConfigError("scenario.modes_per_activity: must be positive");
    if (resource_type_count < 1) throw ConfigError("scenario.resource_type_count: must be positive");
    if (instances_per_evaluation < 1) throw ConfigError("scenario.instances_per_evaluation: must be positive");
    if (!(optimistic_multiplier > 0.0 && optimistic_multiplier <= 1.0))
      throw ConfigError("scenario.optimistic_multiplier: must lie in (0, 1]");
    if (!(pessimistic_multiplier >= 1.0)) throw ConfigError("scenario.pessimistic_multiplier: must be >= 1");
    if (!(capacity_tightness > 0.0)) throw ConfigError("scenario.capacity_tightness: must be positive");
    if (min_base_duration < 1 || max_base_duration < min_base_duration)
      throw ConfigError("scenario.base_duration: need 1 <= min <= max");
    if (!(order_strength_tolerance >= 0.0)) throw ConfigError("scenario.order_strength_tolerance: must be >= 0");
    const double hi = activity_count < 2 ? 0.0 : 1.0;
    if (!(target_order_strength >= 0.0 && target_order_strength <= hi + order_strength_tolerance)) {
      std::ostringstream msg;
      msg << "scenario.target_order_strength: " << target_order_strength << " unattainable for " << activity_count
          << " activities; achievable range is [0, " << hi << "]";
      throw ConfigError(msg.str());
    }
  }
};

namespace detail {

// Arcs (i -> j) over topological labels, keeping only those not implied by
// longer paths.
inline std::vector<std::vector<int>> reduce_arcs(const std::vector<std::vector<int>>& preds) {
  const std::size_t n = preds.size();
  const auto topo = topological_order(preds);
  const auto closure = transitive_closure(preds, topo);
  std::vector<std::vector<int>> reduced(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int i : preds[j]) {
      bool implied = false;
      for (int k : preds[j]) {
        if (k != i && closure.test(static_cast<std::size_t>(i), static_cast<std::size_t>(k))) {
          implied = true;
          break;
        }
      }
      if (!implied) reduced[j].push_back(i);
    }
  }
  return reduced;
}

// Predecessor lists over labels 0..n-1 where arc (i, j), i < j, exists iff draw < p.
inline std::vector<std::vector<int>> arcs_at(const std::vector<std::vector<double>>& draws, double p) {
  const std::size_t n = draws.size();
  std::vector<std::vector<int>> preds(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i)
      if (draws[j][i] < p) preds[j].push_back(static_cast<int>(i));
  return preds;
}

}  // namespace detail

/// Random instance whose precedence order strength lies within the configured
/// tolerance of the target. Arcs are drawn between label-ordered pairs with a
/// probability found by bisection; identical (config, seed) pairs yield
/// identical instances.
inline ProjectInstance generate_instance(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.activity_count);
  const double target = config.target_order_strength;
  const double tol = config.order_strength_tolerance;
  constexpr int kAttempts = 32;
  constexpr int kBisectionSteps = 60;

  std::vector<std::vector<int>> label_preds;
  std::vector<int> label_to_id(n);
  bool found = false;
  double nearest_below = 0.0, nearest_above = 1.0;
  for (int attempt = 0; attempt < kAttempts && !found; ++attempt) {
    Rng rng(derive_seed(seed, {0x70726563ULL, static_cast<std::uint64_t>(attempt)}));
    std::iota(label_to_id.begin(), label_to_id.end(), 0);
    rng.shuffle(label_to_id);
    std::vector<std::vector<double>> draws(n);
    for (std::size_t j = 0; j < n; ++j) {
      draws[j].resize(j);
      for (std::size_t i = 0; i < j; ++i) draws[j][i] = rng.uniform01();
    }
    auto os_at = [&](double p) { return detail::order_strength_of(detail::arcs_at(draws, p)); };
    double lo = 0.0, hi = 1.0;
    for (double p : {0.0, 1.0}) {
      if (std::abs(os_at(p) - target) <= tol) {
        label_preds = detail::arcs_at(draws, p);
        found = true;
        break;
      }
    }
    for (int step = 0; step < kBisectionSteps && !found; ++step) {
      const double mid = 0.5 * (lo + hi);
      const double os = os_at(mid);
      if (std::abs(os - target) <= tol) {
        label_preds = detail::arcs_at(draws, mid);
        found = true;
      } else if (os < target) {
        lo = mid;
        nearest_below = std::max(nearest_below, os);
      } else {
        hi = mid;
        nearest_above = std::min(nearest_above, os);
      }
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "scenario.target_order_strength: " << target << " unattainable within +/-" << tol << " for " << n
        << " activities; nearest achievable values are " << nearest_below << " and " << nearest_above;
    throw ConfigError(msg.str());
  }
  label_preds = detail::reduce_arcs(label_preds);

  Rng rng(derive_seed(seed, {0x6d6f646573ULL}));
  const auto resources = static_cast<std::size_t>(config.resource_type_count);
  const auto modes = static_cast<std::size_t>(config.modes_per_activity);
  std::vector<Activity> activities(n);
  std::vector<int> id_to_label(n);
  for (std::size_t label = 0; label < n; ++label) id_to_label[static_cast<std::size_t>(label_to_id[label])] = static_cast<int>(label);

  for (std::size_t id = 0; id < n; ++id) {
    Activity& act = activities[id];
    act.id = static_cast<int>(id);
    for (int pl : label_preds[static_cast<std::size_t>(id_to_label[id])])
      act.predecessors.push_back(label_to_id[static_cast<std::size_t>(pl)]);
    std::sort(act.predecessors.begin(), act.predecessors.end());

    const auto base = static_cast<int>(rng.uniform_int(config.min_base_duration, config.max_base_duration));
    std::vector<int> base_demand(resources, 0);
    bool any = false;
    for (auto& d : base_demand) {
      if (rng.bernoulli(0.6)) {
        d = static_cast<int>(rng.uniform_int(1, 10));
        any = true;
      }
    }
    if (!any) base_demand[rng.index(resources)] = static_cast<int>(rng.uniform_int(1, 10));

    // Mode 0 is fastest and hungriest; demand scales so that duration x demand stays roughly constant.
    std::vector<int> expected(modes);
    for (std::size_t m = 0; m < modes; ++m) {
      const double stretch = modes > 1 ? 1.0 + 0.6 * static_cast<double>(m) / static_cast<double>(modes - 1) : 1.0;
      expected[m] = std::max(1, static_cast<int>(std::lround(base * stretch)));
    }
    for (std::size_t m = 0; m < modes; ++m) {
      Mode md;
      md.expected = expected[m];
      md.optimistic = std::clamp(static_cast<int>(std::lround(config.optimistic_multiplier * md.expected)), 1, md.expected);
      md.pessimistic = std::max(md.expected, static_cast<int>(std::lround(config.pessimistic_multiplier * md.expected)));
      md.demand.resize(resources);
      for (std::size_t r = 0; r < resources; ++r) {
        if (base_demand[r] == 0) continue;
        const double scaled = base_demand[r] * static_cast<double>(expected[modes - 1]) / static_cast<double>(expected[m]);
        md.demand[r] = std::max(1, static_cast<int>(std::lround(scaled)));
      }
      act.modes.push_back(std::move(md));
    }
  }

  // Capacities: mean concurrent demand of a resource-free earliest-start
  // schedule (mode-averaged durations and demands), scaled by tightness, and
  // never below the largest single-mode demand.
  std::vector<double> mean_dur(n, 0.0);
  std::vector<std::vector<double>> mean_dem(n, std::vector<double>(resources, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (const auto& m : activities[a].modes) {
      mean_dur[a] += m.expected;
      for (std::size_t r = 0; r < resources; ++r) mean_dem[a][r] += m.demand[r];
    }
    mean_dur[a] /= static_cast<double>(modes);
    for (auto& d : mean_dem[a]) d /= static_cast<double>(modes);
  }
  std::vector<std::vector<int>> preds(n);
  for (std::size_t a = 0; a < n; ++a) preds[a] = activities[a].predecessors;
  std::vector<double> finish(n, 0.0);
  double horizon = 0.0;
  for (int a : detail::topological_order(preds)) {
    double start = 0.0;
    for (int p : preds[static_cast<std::size_t>(a)]) start = std::max(start, finish[static_cast<std::size_t>(p)]);
    finish[static_cast<std::size_t>(a)] = start + mean_dur[static_cast<std::size_t>(a)];
    horizon = std::max(horizon, finish[static_cast<std::size_t>(a)]);
  }
  std::vector<int> capacities(resources, 1);
  for (std::size_t r = 0; r < resources; ++r) {
    double work = 0.0;
    int peak = 1;
    for (std::size_t a = 0; a < n; ++a) {
      work += mean_dem[a][r] * mean_dur[a];
      for (const auto& m : activities[a].modes) peak = std::max(peak, m.demand[r]);
    }
    const double concurrent = horizon > 0.0 ? work / horizon : 0.0;
    capacities[r] = std::max(peak, static_cast<int>(std::ceil(config.capacity_tightness * concurrent - 1e-9)));
  }

  std::ostringstream id;
  id << "n" << n << "-os" << target << "-r" << resources << "-s" << seed;
  return ProjectInstance(id.str(), std::move(capacities), std::move(activities));
}

}  // namespace skgp
