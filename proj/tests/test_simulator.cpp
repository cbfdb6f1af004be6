#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "skgp/generator.hpp"
#include "skgp/operators.hpp"
#include "skgp/rules.hpp"
#include "skgp/simulator.hpp"

using namespace skgp;
using namespace skgp::testing;

namespace {

struct FnRules {
  std::function<double(const DecisionContext&, const ActivityModePair&)> order;
  std::function<double(const DecisionContext&, const ActivityGroup&)> group;
  double order_priority(const DecisionContext& c, const ActivityModePair& p) const { return order(c, p); }
  double group_priority(const DecisionContext& c, const ActivityGroup& g) const { return group(c, g); }
};

FnRules by_id() {
  return FnRules{[](const DecisionContext&, const ActivityModePair& p) { return p.activity * 10.0 + p.mode; },
                 [](const DecisionContext&, const ActivityGroup& g) { return -static_cast<double>(g.members.size()); }};
}

// Brute force: every subset of `subset` with distinct activities that fits
// `available` and admits no further pair.
std::set<std::vector<ActivityModePair>> maximal_groups_oracle(const ProjectInstance& inst, const std::vector<ActivityModePair>& subset,
                                                              const std::vector<int>& available) {
  const std::size_t m = subset.size();
  auto feasible = [&](std::uint32_t mask) {
    std::vector<int> use(available.size(), 0);
    std::set<int> acts;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(mask >> i & 1U)) continue;
      if (!acts.insert(subset[i].activity).second) return false;
      const auto& d = inst.mode(subset[i].activity, subset[i].mode).demand;
      for (std::size_t r = 0; r < d.size(); ++r) use[r] += d[r];
    }
    for (std::size_t r = 0; r < use.size(); ++r)
      if (use[r] > available[r]) return false;
    return true;
  };
  std::set<std::vector<ActivityModePair>> out;
  for (std::uint32_t mask = 1; mask < (1U << m); ++mask) {
    if (!feasible(mask)) continue;
    bool maximal = true;
    for (std::size_t i = 0; i < m && maximal; ++i)
      if (!(mask >> i & 1U) && feasible(mask | (1U << i))) maximal = false;
    if (!maximal) continue;
    std::vector<ActivityModePair> g;
    for (std::size_t i = 0; i < m; ++i)
      if (mask >> i & 1U) g.push_back(subset[i]);
    std::sort(g.begin(), g.end());
    out.insert(g);
  }
  return out;
}

// Longest path over realized durations, ignoring resources.
int critical_path(const ProjectInstance& inst, const ScheduleResult& r) {
  std::vector<int> dur(inst.size());
  for (const auto& s : r.start_log) dur[static_cast<std::size_t>(s.activity)] = s.duration;
  std::vector<int> fin(inst.size(), 0);
  int best = 0;
  for (int a : inst.topological_order()) {
    int st = 0;
    for (int p : inst.activity(a).predecessors) st = std::max(st, fin[static_cast<std::size_t>(p)]);
    fin[static_cast<std::size_t>(a)] = st + dur[static_cast<std::size_t>(a)];
    best = std::max(best, fin[static_cast<std::size_t>(a)]);
  }
  return best;
}

ScenarioConfig scenario(int n, double os) {
  ScenarioConfig c;
  c.activity_count = n;
  c.target_order_strength = os;
  return c;
}

}  // namespace

TEST(EligiblePairs, InitialChainOnlyFirstActivity) {
  const auto inst = chain({2, 3, 4}, 3);
  const auto pairs = eligible_pairs(inst, ProjectState::initial(inst));
  ASSERT_EQ(pairs.size(), 3u);
  for (int m = 0; m < 3; ++m) EXPECT_EQ(pairs[static_cast<std::size_t>(m)], (ActivityModePair{0, m}));
}

TEST(EligiblePairs, EmptyWhenAllFinished) {
  const auto inst = chain({2, 3});
  auto st = ProjectState::initial(inst);
  st.status.assign(2, ActivityStatus::Finished);
  st.finished_count = 2;
  EXPECT_TRUE(eligible_pairs(inst, st).empty());
}

TEST(EligiblePairs, DiamondAfterStartMatchesBruteForceFilter) {
  std::vector<Activity> acts{make_activity(0, {fixed_mode(1, {1})}),
                             make_activity(1, {fixed_mode(2, {4}), fixed_mode(4, {2})}, {0}),
                             make_activity(2, {fixed_mode(2, {5}), fixed_mode(5, {3})}, {0}),
                             make_activity(3, {fixed_mode(1, {1})}, {1, 2})};
  const ProjectInstance inst("d", {6}, std::move(acts));
  auto st = ProjectState::initial(inst);
  st.status[0] = ActivityStatus::Finished;
  st.finished_count = 1;
  st.available = {2};  // something else is holding 4 units
  std::vector<ActivityModePair> oracle;
  for (const auto& a : inst.activities())
    for (std::size_t m = 0; m < a.modes.size(); ++m) {
      bool ok = st.status_of(a.id) == ActivityStatus::Pending;
      for (int p : a.predecessors) ok = ok && st.status_of(p) == ActivityStatus::Finished;
      ok = ok && a.modes[m].demand[0] <= st.available[0];
      if (ok) oracle.push_back({a.id, static_cast<int>(m)});
    }
  EXPECT_EQ(eligible_pairs(inst, st), oracle);
  EXPECT_EQ(oracle, (std::vector<ActivityModePair>{{1, 1}}));
}

TEST(RankOrder, RoundingNoiseTiesKeepInputOrder) {
  const std::vector<double> p{0.1 + 0.2, 0.3, 0.05};
  EXPECT_EQ(rank_order(p), (std::vector<std::size_t>{2, 0, 1}));
  const std::vector<double> groups{0.3, 0.2, 0.1 + 0.1};
  EXPECT_EQ(first_best(groups), 1u);
}

TEST(KneeSubset, SinglePair) {
  const std::vector<ActivityModePair> p{{3, 0}};
  EXPECT_EQ(knee_subset(p, std::vector<double>{4.2}), p);
}

TEST(KneeSubset, AllEqualReturnsAll) {
  const std::vector<ActivityModePair> p{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_EQ(knee_subset(p, std::vector<double>{5, 5, 5}).size(), 3u);
}

TEST(KneeSubset, MaxChordDistanceHandOracle) {
  // Normalised points (0,0) (.25,.0118) (.5,.0235) (.75,.941) (1,1):
  // |x - y| = 0, .238, .476, .191, 0 -> knee at the third point.
  const std::vector<ActivityModePair> p{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  const auto k = knee_subset(p, std::vector<double>{1, 1.1, 1.2, 9, 9.5});
  EXPECT_EQ(k, (std::vector<ActivityModePair>{{0, 0}, {1, 0}, {2, 0}}));
}

TEST(KneeSubset, SortsBeforeCuttingAndBreaksTiesById) {
  const std::vector<ActivityModePair> p{{4, 0}, {0, 0}, {3, 0}, {1, 0}, {2, 0}};
  const auto k = knee_subset(p, std::vector<double>{9.5, 1.2, 9, 1, 1.1});
  EXPECT_EQ(k, (std::vector<ActivityModePair>{{1, 0}, {2, 0}, {0, 0}}));
}

TEST(KneeSubset, InfinitePrioritiesNeverPrecedeFinite) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<ActivityModePair> p{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_EQ(knee_subset(p, std::vector<double>{inf, 2.0, inf}), (std::vector<ActivityModePair>{{1, 0}}));
  EXPECT_EQ(knee_subset(p, std::vector<double>{inf, inf, inf}).size(), 3u);
  EXPECT_EQ(knee_subset(p, std::vector<double>{NAN, 1.0, 3.0}).front(), (ActivityModePair{1, 0}));
}

TEST(KneeSubset, InvariantUnderIncreasingAffineTransforms) {
  Rng rng(5);
  std::vector<ActivityModePair> p;
  for (int i = 0; i < 12; ++i) p.push_back({i, 0});
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 1 + rng.index(12);
    std::vector<ActivityModePair> pp(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(m));
    std::vector<double> pr(m), tr(m);
    for (std::size_t i = 0; i < m; ++i) {
      pr[i] = std::round(rng.uniform(-50, 50) * 4) / 4;  // frequent ties
      tr[i] = 2 * pr[i] + 1;
    }
    ASSERT_EQ(knee_subset(pp, pr), knee_subset(pp, tr));
  }
}

TEST(Groups, SinglePairSubset) {
  const auto inst = independent({1, 2});
  const std::vector<ActivityModePair> s{{0, 0}};
  const auto g = enumerate_feasible_groups(inst, s, ProjectState::initial(inst));
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].members, s);
}

TEST(Groups, ModesOfOneActivityAreExclusive) {
  const auto inst = chain({2}, 2);
  const std::vector<ActivityModePair> s{{0, 0}, {0, 1}};
  const auto g = enumerate_feasible_groups(inst, s, ProjectState::initial(inst));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].members.size(), 1u);
  EXPECT_EQ(g[1].members.size(), 1u);
}

TEST(Groups, ThreeByThreeInCapacitySixMatchesPowerSetOracle) {
  std::vector<Activity> acts;
  for (int i = 0; i < 3; ++i) acts.push_back(make_activity(i, {fixed_mode(1, {3})}));
  const ProjectInstance inst("g", {6}, std::move(acts));
  const std::vector<ActivityModePair> s{{0, 0}, {1, 0}, {2, 0}};
  const auto st = ProjectState::initial(inst);
  const auto groups = enumerate_feasible_groups(inst, s, st);
  std::set<std::vector<ActivityModePair>> got;
  for (const auto& g : groups) got.insert(g.members);
  EXPECT_EQ(got, maximal_groups_oracle(inst, s, st.available));
  EXPECT_EQ(groups.size(), 3u);
  for (const auto& g : groups) EXPECT_EQ(g.members.size(), 2u);
}

TEST(Groups, RandomSubsetsMatchPowerSetOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(5));
    const int res = 1 + static_cast<int>(rng.index(3));
    std::vector<int> caps(static_cast<std::size_t>(res));
    for (auto& c : caps) c = 4 + static_cast<int>(rng.index(8));
    std::vector<Activity> acts;
    for (int a = 0; a < n; ++a) {
      std::vector<Mode> ms;
      const int modes = 1 + static_cast<int>(rng.index(3));
      for (int m = 0; m < modes; ++m) {
        std::vector<int> d(static_cast<std::size_t>(res));
        for (std::size_t r = 0; r < d.size(); ++r) d[r] = static_cast<int>(rng.index(static_cast<std::size_t>(caps[r]) / 2 + 1));
        ms.push_back(fixed_mode(1, d));
      }
      acts.push_back(make_activity(a, std::move(ms)));
    }
    const ProjectInstance inst("r", caps, std::move(acts));
    const auto st = ProjectState::initial(inst);
    auto el = eligible_pairs(inst, st);
    rng.shuffle(el);
    el.resize(std::min<std::size_t>(el.size(), 8));
    const auto groups = enumerate_feasible_groups(inst, el, st);
    std::set<std::vector<ActivityModePair>> got;
    for (const auto& g : groups) ASSERT_TRUE(got.insert(g.members).second) << "duplicate group";
    ASSERT_EQ(got, maximal_groups_oracle(inst, el, st.available)) << "trial " << trial;
  }
}

TEST(Groups, CapLimitsCount) {
  std::vector<Activity> acts;
  for (int i = 0; i < 10; ++i) acts.push_back(make_activity(i, {fixed_mode(1, {1})}));
  const ProjectInstance inst("c", {5}, std::move(acts));
  const auto st = ProjectState::initial(inst);
  const auto el = eligible_pairs(inst, st);
  EXPECT_EQ(enumerate_feasible_groups(inst, el, st, 7).size(), 7u);  // C(10,5) = 252 maximal groups exist
  EXPECT_EQ(enumerate_feasible_groups(inst, el, st, 1000).size(), 252u);
}

TEST(Simulate, ChainMakespanIsSerialSum) {
  const auto inst = chain({3, 5, 2, 7}, 3);
  const auto r = simulate(inst, reference_rules(), 99);
  int sum = 0;
  for (const auto& s : r.start_log) sum += s.duration;
  EXPECT_EQ(r.makespan, sum);
  EXPECT_TRUE(validate_schedule(inst, r));
}

TEST(Simulate, UnlimitedCapacityGivesRealizedCriticalPath) {
  ScenarioConfig c = scenario(25, 0.5);
  c.capacity_tightness = 1000.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = generate_instance(c, seed);
    const auto r = simulate(inst, reference_rules(), seed + 100);
    EXPECT_EQ(r.makespan, critical_path(inst, r));
  }
}

TEST(Simulate, DeterministicForFixedSeedAndRules) {
  const auto inst = generate_instance(scenario(30, 0.25), 1);
  const auto a = simulate(inst, reference_rules(), 5);
  const auto b = simulate(inst, reference_rules(), 5);
  EXPECT_EQ(a.start_log, b.start_log);
  EXPECT_EQ(a.makespan, b.makespan);
}

TEST(Simulate, DeterministicDurationsIdenticalAcrossSeeds) {
  ScenarioConfig c = scenario(20, 0.5);
  c.optimistic_multiplier = 1.0;
  c.pessimistic_multiplier = 1.0;
  const auto inst = generate_instance(c, 4);
  EXPECT_EQ(simulate(inst, by_id(), 1).start_log, simulate(inst, by_id(), 2).start_log);
}

TEST(Simulate, AffineTransformOfOrderingRuleKeepsStartLog) {
  Rng rng(8);
  TreeLimits limits;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = generate_instance(scenario(20, 0.25 + 0.25 * (trial % 3)), static_cast<std::uint64_t>(trial));
    RulePair f = random_rules(limits, rng);
    RulePair g = f;
    auto nodes = std::vector<Node>{{Op::Add, 0}, {Op::Mul, 0}, {Op::Const, 2.0}};
    nodes.insert(nodes.end(), f.ordering.nodes().begin(), f.ordering.nodes().end());
    nodes.push_back({Op::Const, 1.0});
    g.ordering = Tree(Role::Ordering, nodes);
    EXPECT_EQ(simulate(inst, f, 3).start_log, simulate(inst, g, 3).start_log) << f.ordering.to_string();
  }
}

TEST(Simulate, NonFinitePrioritiesNeverAbort) {
  const auto inst = generate_instance(scenario(15, 0.5), 2);
  FnRules nan_rules{[](const DecisionContext&, const ActivityModePair&) { return std::nan(""); },
                    [](const DecisionContext&, const ActivityGroup&) { return std::numeric_limits<double>::infinity(); }};
  const auto r = simulate(inst, nan_rules, 1);
  EXPECT_TRUE(validate_schedule(inst, r));
}

TEST(Simulate, TraceRecordsEveryDecision) {
  const auto inst = generate_instance(scenario(15, 0.25), 2);
  const auto r = simulate(inst, reference_rules(), 1, SimulationOptions{true, 256});
  ASSERT_TRUE(r.decision_trace);
  std::size_t started = 0;
  for (const auto& d : *r.decision_trace) {
    EXPECT_FALSE(d.knee.empty());
    EXPECT_LT(d.chosen, d.groups.size());
    started += d.groups[d.chosen].members.size();
  }
  EXPECT_EQ(started, inst.size());
  std::ostringstream os;
  write_trace_jsonl(os, r);
  const auto text = os.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.decision_trace->size());
  EXPECT_NE(text.find("\"knee_subset\""), std::string::npos);
}

TEST(Simulate, FeasibleAndAboveLowerBoundOnRandomRules) {
  Rng rng(21);
  TreeLimits limits;
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = generate_instance(scenario(10 + 10 * (trial % 3), 0.25 * (1 + trial % 3)), static_cast<std::uint64_t>(trial));
    const auto rules = random_rules(limits, rng);
    const auto r = simulate(inst, rules, static_cast<std::uint64_t>(trial));
    const auto rep = validate_schedule(inst, r);
    ASSERT_TRUE(rep) << rep.violation;
    EXPECT_GE(r.makespan, lower_bound(inst));
  }
}

TEST(ValidateSchedule, NamesPrecedenceViolation) {
  const auto inst = chain({3, 3});
  ScheduleResult r;
  r.start_log = {{0, 0, 0, 3}, {1, 0, 2, 3}};
  r.makespan = 5;
  const auto rep = validate_schedule(inst, r);
  EXPECT_FALSE(rep);
  EXPECT_NE(rep.violation.find("precedence"), std::string::npos);
  EXPECT_NE(rep.violation.find("t=2"), std::string::npos);
}

TEST(ValidateSchedule, NamesResourceViolationFromSweep) {
  std::vector<Activity> acts{make_activity(0, {fixed_mode(4, {3})}), make_activity(1, {fixed_mode(4, {3})})};
  const ProjectInstance inst("two", {5}, std::move(acts));
  ScheduleResult r;
  r.start_log = {{0, 0, 0, 4}, {1, 0, 2, 4}};  // overlap on [2, 4): usage 6 > 5
  r.makespan = 6;
  const auto rep = validate_schedule(inst, r);
  EXPECT_FALSE(rep);
  EXPECT_NE(rep.violation.find("resource"), std::string::npos);
  EXPECT_NE(rep.violation.find("t=2"), std::string::npos);
  r.start_log[1].start = 4;  // back-to-back is fine
  r.makespan = 8;
  EXPECT_TRUE(validate_schedule(inst, r));
}
