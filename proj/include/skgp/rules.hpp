#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "skgp/state.hpp"
#include "skgp/tree.hpp"

namespace skgp {

/// Mean over resources of amount(r) / capacity[r], rounded once. Terms are
/// summed as integers over the capacities' common multiple, so equal
/// rationals give identical doubles whatever the terms.
template <typename Amount>
double mean_capacity_fraction(const ProjectInstance& inst, Amount&& amount) {
  const auto& caps = inst.capacities();
  const std::int64_t lcm = inst.capacity_lcm();
  const double resources = static_cast<double>(caps.size());
  if (lcm == 0) {
    double sum = 0.0;
    for (std::size_t r = 0; r < caps.size(); ++r) sum += static_cast<double>(amount(r)) / caps[r];
    return sum / resources;
  }
  std::int64_t num = 0;
  for (std::size_t r = 0; r < caps.size(); ++r) num += static_cast<std::int64_t>(amount(r)) * (lcm / caps[r]);
  return static_cast<double>(num) / (static_cast<double>(lcm) * resources);
}

/// Attribute vector of an activity-mode pair, in kOrderingTerminals order.
///
/// Demand fractions are demand / capacity per resource. `cp_to_end` is the
/// pair's expected duration plus the longest successor chain (minimum expected
/// durations). `res_util` is the mean fraction of capacity currently in use.
inline OrderingAttributes ordering_attributes(const DecisionContext& ctx, const ActivityModePair& pair) {
  const auto& inst = ctx.instance;
  const Mode& m = inst.mode(pair.activity, pair.mode);
  const auto& caps = inst.capacities();
  double dem_max = 0.0;
  for (std::size_t r = 0; r < caps.size(); ++r) dem_max = std::max(dem_max, static_cast<double>(m.demand[r]) / caps[r]);
  const double dem_mean = mean_capacity_fraction(inst, [&](std::size_t r) { return m.demand[r]; });
  const double used = mean_capacity_fraction(inst, [&](std::size_t r) { return caps[r] - ctx.state.available[r]; });
  return {static_cast<double>(m.expected),
          static_cast<double>(m.optimistic),
          static_cast<double>(m.pessimistic),
          dem_max,
          dem_mean,
          static_cast<double>(inst.successors(pair.activity).size()),
          inst.successor_work(pair.activity),
          m.expected + inst.tail_length(pair.activity),
          static_cast<double>(ctx.eligible_count),
          used,
          static_cast<double>(ctx.state.time)};
}

/// Attribute vector of an activity group, in kGroupTerminals order.
inline GroupAttributes group_attributes(const DecisionContext& ctx, const ActivityGroup& group) {
  const auto& inst = ctx.instance;
  const auto& caps = inst.capacities();
  std::vector<int> demand(caps.size(), 0);
  double sum_dur = 0.0, max_dur = 0.0, sum_succ = 0.0;
  for (const auto& p : group.members) {
    const Mode& m = inst.mode(p.activity, p.mode);
    sum_dur += m.expected;
    max_dur = std::max(max_dur, static_cast<double>(m.expected));
    sum_succ += static_cast<double>(inst.successors(p.activity).size());
    for (std::size_t r = 0; r < caps.size(); ++r) demand[r] += m.demand[r];
  }
  const double dem = mean_capacity_fraction(inst, [&](std::size_t r) { return demand[r]; });
  const double slack = mean_capacity_fraction(inst, [&](std::size_t r) { return ctx.state.available[r] - demand[r]; });
  return {static_cast<double>(group.members.size()), sum_dur, max_dur, dem, sum_succ, slack};
}

/// Priority of a pair under an ordering tree; smaller ranks first. Non-finite
/// results map to +infinity.
inline double eval_ordering(const Tree& tree, const ActivityModePair& pair, const DecisionContext& ctx) {
  return tree.evaluate(ordering_attributes(ctx, pair));
}

inline double eval_group(const Tree& tree, const ActivityGroup& group, const DecisionContext& ctx) {
  return tree.evaluate(group_attributes(ctx, group));
}

/// A GP individual's heuristic: one activity ordering tree and one group
/// selection tree.
struct RulePair {
  Tree ordering;
  Tree group;

  double order_priority(const DecisionContext& ctx, const ActivityModePair& pair) const {
    return eval_ordering(ordering, pair, ctx);
  }
  double group_priority(const DecisionContext& ctx, const ActivityGroup& group_) const {
    return eval_group(group, group_, ctx);
  }

  std::string to_string() const { return ordering.to_string() + "\n" + group.to_string(); }

  friend bool operator==(const RulePair&, const RulePair&) = default;
};

/// Fixed human-designed baseline: shortest duration per successor first, and
/// the group using the most resources first.
inline RulePair reference_rules() {
  return RulePair{parse_tree("(div exp_dur (add 1 succ_count))", Role::Ordering),
                  parse_tree("(neg grp_sum_dem)", Role::Group)};
}

}  // namespace skgp
