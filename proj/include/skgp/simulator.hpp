#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skgp/project.hpp"
#include "skgp/state.hpp"

namespace skgp {

/// Anything that can prioritise pairs and groups; smaller priority wins.
template <typename R>
concept SchedulingRules = requires(const R& r, const DecisionContext& ctx, const ActivityModePair& p,
                                   const ActivityGroup& g) {
  { r.order_priority(ctx, p) } -> std::convertible_to<double>;
  { r.group_priority(ctx, g) } -> std::convertible_to<double>;
};

inline double sanitize_priority(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

/// Pairs whose predecessors are finished, that are neither running nor
/// finished, and whose mode demand fits the available resources. Ordered by
/// activity id, then mode index.
inline std::vector<ActivityModePair> eligible_pairs(const ProjectInstance& instance, const ProjectState& state) {
  std::vector<ActivityModePair> out;
  for (const auto& act : instance.activities()) {
    if (state.status_of(act.id) != ActivityStatus::Pending) continue;
    if (!predecessors_finished(instance, state, act.id)) continue;
    for (std::size_t m = 0; m < act.modes.size(); ++m)
      if (fits(act.modes[m].demand, state.available)) out.push_back({act.id, static_cast<int>(m)});
  }
  return out;
}

/// Length of the knee prefix of ascending priorities.
///
/// Both axes are min-max normalised and the cut is placed after the point
/// farthest from the chord joining the first and last points. Normalisation
/// makes the cut invariant under increasing affine transforms. Infinite
/// priorities sit at the tail and are excluded from the curve; an all-equal
/// sequence returns everything.
inline std::size_t knee_cut(std::span<const double> sorted) {
  const std::size_t m = sorted.size();
  if (m <= 1) return m;
  std::size_t finite = 0;
  while (finite < m && std::isfinite(sorted[finite])) ++finite;
  if (finite == 0) return m;
  if (finite == 1) return 1;
  const double lo = sorted.front();
  const double hi = sorted[finite - 1];
  if (!(hi > lo)) return finite == m ? m : finite;
  constexpr double kTieTolerance = 1e-9;
  std::size_t best = 0;
  double best_dist = -1.0;
  for (std::size_t i = 0; i < finite; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(finite - 1);
    const double y = (sorted[i] - lo) / (hi - lo);
    const double d = std::abs(x - y);
    if (d > best_dist + kTieTolerance) {
      best = i;
      best_dist = d;
    }
  }
  return best + 1;
}

/// Priorities this close count as equal: 1e-12 relative, absolute below
/// magnitude 1. Trees that agree in exact arithmetic can differ by a few ulps
/// once rounded, and such candidates must tie.
inline constexpr double kPriorityTieTolerance = 1e-12;

// Whether `v` (>= anchor) falls in the tie block anchored at `anchor`.
inline bool priority_tied(double anchor, double v) {
  return v == anchor || (std::isfinite(v) && v - anchor <= kPriorityTieTolerance * std::max(1.0, std::abs(anchor)));
}

// Indices of `priorities` in ascending order. Tie blocks are anchored at
// their smallest value and keep input order.
inline std::vector<std::size_t> rank_order(std::span<const double> priorities) {
  std::vector<std::size_t> idx(priorities.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return priorities[a] < priorities[b] || (priorities[a] == priorities[b] && a < b);
  });
  for (std::size_t start = 0; start < idx.size();) {
    std::size_t end = start + 1;
    while (end < idx.size() && priority_tied(priorities[idx[start]], priorities[idx[end]])) ++end;
    if (end - start > 1) std::sort(idx.begin() + static_cast<std::ptrdiff_t>(start), idx.begin() + static_cast<std::ptrdiff_t>(end));
    start = end;
  }
  return idx;
}

// First candidate (in input order) of the lowest tie block.
inline std::size_t first_best(std::span<const double> priorities) {
  double lo = priorities[0];
  for (double v : priorities) lo = std::min(lo, v);
  std::size_t i = 0;
  while (!priority_tied(lo, priorities[i])) ++i;
  return i;
}

/// Knee prefix of the priority-ascending ordering of `pairs`. Ties are broken
/// by (activity id, mode index).
inline std::vector<ActivityModePair> knee_subset(std::span<const ActivityModePair> pairs, std::span<const double> priorities) {
  std::vector<std::size_t> by_id(pairs.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::stable_sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return pairs[a] < pairs[b]; });
  std::vector<double> pr;
  pr.reserve(by_id.size());
  for (auto i : by_id) pr.push_back(sanitize_priority(priorities[i]));
  const auto order = rank_order(pr);
  std::vector<double> sorted;
  sorted.reserve(order.size());
  for (auto k : order) sorted.push_back(pr[k]);
  const std::size_t cut = knee_cut(sorted);
  std::vector<ActivityModePair> out;
  out.reserve(cut);
  for (std::size_t k = 0; k < cut; ++k) out.push_back(pairs[by_id[order[k]]]);
  return out;
}

namespace detail {

class GroupEnumerator {
 public:
  GroupEnumerator(const ProjectInstance& instance, std::span<const ActivityModePair> subset, const std::vector<int>& available,
                  std::size_t cap)
      : instance_(instance), subset_(subset), residual_(available), cap_(cap), chosen_(subset.size(), false) {}

  std::vector<ActivityGroup> run() {
    dfs(0);
    return std::move(groups_);
  }

 private:
  const std::vector<int>& demand(std::size_t i) const { return instance_.mode(subset_[i].activity, subset_[i].mode).demand; }

  bool activity_taken(int activity) const {
    for (std::size_t j = 0; j < subset_.size(); ++j)
      if (chosen_[j] && subset_[j].activity == activity) return true;
    return false;
  }

  bool addable(std::size_t i) const { return !activity_taken(subset_[i].activity) && fits(demand(i), residual_); }

  // Could a later pair still make pair i unaddable?
  bool blockable(std::size_t i) const {
    const auto& di = demand(i);
    for (std::size_t j = i + 1; j < subset_.size(); ++j) {
      if (subset_[j].activity == subset_[i].activity) return true;
      const auto& dj = demand(j);
      for (std::size_t r = 0; r < di.size(); ++r)
        if (di[r] > 0 && dj[r] > 0) return true;
    }
    return false;
  }

  void dfs(std::size_t i) {
    if (groups_.size() >= cap_ || ++visited_ > kNodeBudget) return;
    if (i == subset_.size()) {
      for (std::size_t j = 0; j < subset_.size(); ++j)
        if (!chosen_[j] && addable(j)) return;  // not maximal
      ActivityGroup g;
      for (std::size_t j = 0; j < subset_.size(); ++j)
        if (chosen_[j]) g.members.push_back(subset_[j]);
      if (g.members.empty()) return;
      std::sort(g.members.begin(), g.members.end());
      groups_.push_back(std::move(g));
      return;
    }
    const bool can_add = addable(i);
    if (can_add) {
      const auto& d = demand(i);
      chosen_[i] = true;
      for (std::size_t r = 0; r < d.size(); ++r) residual_[r] -= d[r];
      dfs(i + 1);
      for (std::size_t r = 0; r < d.size(); ++r) residual_[r] += d[r];
      chosen_[i] = false;
    }
    if (!can_add || blockable(i)) dfs(i + 1);
  }

  static constexpr std::size_t kNodeBudget = 200000;

  const ProjectInstance& instance_;
  std::span<const ActivityModePair> subset_;
  std::vector<int> residual_;
  std::size_t cap_;
  std::vector<bool> chosen_;
  std::vector<ActivityGroup> groups_;
  std::size_t visited_ = 0;
};

}  // namespace detail

/// Maximal resource-feasible groups (one mode per activity) drawn from
/// `subset`, in depth-first include-first order over the subset sequence.
/// At most `cap` groups are returned.
inline std::vector<ActivityGroup> enumerate_feasible_groups(const ProjectInstance& instance,
                                                            std::span<const ActivityModePair> subset,
                                                            const ProjectState& state, std::size_t cap = 256) {
  return detail::GroupEnumerator(instance, subset, state.available, cap).run();
}

struct StartRecord {
  int activity = 0;
  int mode = 0;
  int start = 0;
  int duration = 0;

  int finish() const { return start + duration; }
  friend bool operator==(const StartRecord&, const StartRecord&) = default;
};

struct DecisionRecord {
  ProjectState state;  // snapshot before the chosen group starts
  std::vector<ActivityModePair> eligible;
  std::vector<double> priorities;  // aligned with `eligible`
  std::vector<ActivityModePair> knee;
  std::vector<ActivityGroup> groups;
  std::vector<double> group_priorities;
  std::size_t chosen = 0;
};

struct ScheduleResult {
  int makespan = 0;
  std::vector<StartRecord> start_log;
  std::optional<std::vector<DecisionRecord>> decision_trace;
};

struct SimulationOptions {
  bool record_trace = false;
  std::size_t group_cap = 256;
};

/// Runs the project to completion under `rules`. Realized durations are drawn
/// per (activity, mode) from `duration_seed` when an activity starts.
template <SchedulingRules Rules>
ScheduleResult simulate(const ProjectInstance& instance, const Rules& rules, std::uint64_t duration_seed,
                        const SimulationOptions& options = {}) {
  ScheduleResult result;
  if (options.record_trace) result.decision_trace.emplace();
  result.start_log.reserve(instance.size());
  ProjectState state = ProjectState::initial(instance);
  std::vector<double> priorities, sorted;
  std::vector<ActivityModePair> ranked;

  while (!state.done()) {
    for (;;) {
      auto eligible = eligible_pairs(instance, state);
      if (eligible.empty()) break;
      const DecisionContext ctx{instance, state, static_cast<int>(eligible.size())};
      priorities.resize(eligible.size());
      for (std::size_t i = 0; i < eligible.size(); ++i)
        priorities[i] = sanitize_priority(static_cast<double>(rules.order_priority(ctx, eligible[i])));
      // eligible is already in (activity, mode) order, so a stable sort breaks ties by id.
      const auto order = rank_order(priorities);
      ranked.clear();
      sorted.clear();
      for (auto i : order) {
        ranked.push_back(eligible[i]);
        sorted.push_back(priorities[i]);
      }
      ranked.resize(knee_cut(sorted));
      auto groups = enumerate_feasible_groups(instance, ranked, state, options.group_cap);
      std::vector<double> gp(groups.size());
      for (std::size_t g = 0; g < groups.size(); ++g) gp[g] = sanitize_priority(static_cast<double>(rules.group_priority(ctx, groups[g])));
      const std::size_t chosen = first_best(gp);
      if (result.decision_trace)
        result.decision_trace->push_back(DecisionRecord{state, eligible, priorities, ranked, groups, gp, chosen});
      for (const auto& p : groups[chosen].members) {
        const Mode& mode = instance.mode(p.activity, p.mode);
        const int dur = realized_duration(mode, duration_seed, p.activity, p.mode);
        state.status[static_cast<std::size_t>(p.activity)] = ActivityStatus::Running;
        state.realized[static_cast<std::size_t>(p.activity)] = dur;
        state.running.push_back({p.activity, p.mode, state.time, state.time + dur});
        for (std::size_t r = 0; r < mode.demand.size(); ++r) state.available[r] -= mode.demand[r];
        result.start_log.push_back({p.activity, p.mode, state.time, dur});
      }
    }
    if (state.running.empty()) throw std::logic_error("simulate: no running activity and nothing eligible");
    int next = std::numeric_limits<int>::max();
    for (const auto& r : state.running) next = std::min(next, r.finish);
    state.time = next;
    std::vector<RunningActivity> still;
    for (const auto& r : state.running) {
      if (r.finish == next) {
        state.status[static_cast<std::size_t>(r.activity)] = ActivityStatus::Finished;
        ++state.finished_count;
        const auto& d = instance.mode(r.activity, r.mode).demand;
        for (std::size_t k = 0; k < d.size(); ++k) state.available[k] += d[k];
      } else {
        still.push_back(r);
      }
    }
    state.running = std::move(still);
    result.makespan = std::max(result.makespan, next);
  }
  return result;
}

struct ValidationReport {
  bool ok = true;
  std::string violation;

  explicit operator bool() const { return ok; }
};

/// Checks completeness, duration ranges, precedence and a sweep-line resource
/// profile of a schedule. Reports the first violated constraint.
inline ValidationReport validate_schedule(const ProjectInstance& instance, const ScheduleResult& result) {
  auto fail = [](std::string msg) { return ValidationReport{false, std::move(msg)}; };
  const std::size_t n = instance.size();
  if (result.start_log.size() != n)
    return fail("completeness: " + std::to_string(result.start_log.size()) + " starts for " + std::to_string(n) + " activities");
  std::vector<const StartRecord*> by_activity(n, nullptr);
  for (const auto& s : result.start_log) {
    if (s.activity < 0 || static_cast<std::size_t>(s.activity) >= n)
      return fail("completeness: unknown activity " + std::to_string(s.activity));
    if (by_activity[static_cast<std::size_t>(s.activity)])
      return fail("completeness: activity " + std::to_string(s.activity) + " started twice");
    by_activity[static_cast<std::size_t>(s.activity)] = &s;
    const auto& act = instance.activity(s.activity);
    if (s.mode < 0 || static_cast<std::size_t>(s.mode) >= act.modes.size())
      return fail("mode: activity " + std::to_string(s.activity) + " has no mode " + std::to_string(s.mode));
    const Mode& m = act.modes[static_cast<std::size_t>(s.mode)];
    if (s.duration < m.optimistic || s.duration > m.pessimistic)
      return fail("duration: activity " + std::to_string(s.activity) + " ran " + std::to_string(s.duration) + " outside [" +
                  std::to_string(m.optimistic) + ", " + std::to_string(m.pessimistic) + "]");
    if (s.start < 0) return fail("time: activity " + std::to_string(s.activity) + " starts before 0");
  }
  int makespan = 0;
  for (const auto& s : result.start_log) {
    makespan = std::max(makespan, s.finish());
    for (int p : instance.activity(s.activity).predecessors) {
      const auto* ps = by_activity[static_cast<std::size_t>(p)];
      if (s.start < ps->finish())
        return fail("precedence: activity " + std::to_string(s.activity) + " starts at t=" + std::to_string(s.start) +
                    " before predecessor " + std::to_string(p) + " finishes at t=" + std::to_string(ps->finish()));
    }
  }
  // Usage only increases at start times, so checking every start instant suffices.
  const auto& caps = instance.capacities();
  for (const auto& probe : result.start_log) {
    const int t = probe.start;
    std::vector<int> usage(caps.size(), 0);
    for (const auto& s : result.start_log) {
      if (s.start <= t && t < s.finish()) {
        const auto& d = instance.mode(s.activity, s.mode).demand;
        for (std::size_t r = 0; r < caps.size(); ++r) usage[r] += d[r];
      }
    }
    for (std::size_t r = 0; r < caps.size(); ++r)
      if (usage[r] > caps[r])
        return fail("resource: usage " + std::to_string(usage[r]) + " of resource " + std::to_string(r) + " exceeds capacity " +
                    std::to_string(caps[r]) + " at t=" + std::to_string(t));
  }
  if (makespan != result.makespan)
    return fail("makespan: reported " + std::to_string(result.makespan) + " but last finish is " + std::to_string(makespan));
  return {};
}

namespace detail {
inline Json pair_json(const ActivityModePair& p) { return Json::array({p.activity, p.mode}); }
inline Json group_json(const ActivityGroup& g) {
  Json out = Json::array();
  for (const auto& p : g.members) out.push_back(pair_json(p));
  return out;
}
}  // namespace detail

/// One JSON object per decision point:
/// {time, eligible, priorities, knee_subset, groups, chosen}.
inline void write_trace_jsonl(std::ostream& out, const ScheduleResult& result) {
  if (!result.decision_trace) return;
  for (const auto& d : *result.decision_trace) {
    Json j;
    j["time"] = d.state.time;
    Json el = Json::array(), pr = Json::array(), knee = Json::array(), groups = Json::array();
    for (const auto& p : d.eligible) el.push_back(detail::pair_json(p));
    for (double v : d.priorities) pr.push_back(std::isfinite(v) ? Json(v) : Json("inf"));
    for (const auto& p : d.knee) knee.push_back(detail::pair_json(p));
    for (const auto& g : d.groups) groups.push_back(detail::group_json(g));
    j["eligible"] = std::move(el);
    j["priorities"] = std::move(pr);
    j["knee_subset"] = std::move(knee);
    j["groups"] = std::move(groups);
    j["chosen"] = detail::group_json(d.groups[d.chosen]);
    out << j.dump() << '\n';
  }
}

}  // namespace skgp
