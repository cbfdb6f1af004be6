#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skgp/error.hpp"
#include "skgp/random.hpp"
#include "skgp/rules.hpp"
#include "skgp/simulator.hpp"

namespace skgp {

enum class SituationKind : std::uint8_t { Ordering, GroupSelection };

inline std::string_view kind_name(SituationKind k) { return k == SituationKind::Ordering ? "ordering" : "group_selection"; }

/// A frozen decision point shared by every individual of a run. Candidates are
/// stored in canonical (ascending id) order.
struct DecisionSituation {
  SituationKind kind = SituationKind::Ordering;
  std::shared_ptr<const ProjectInstance> instance;
  ProjectState state;
  int eligible_count = 0;
  std::vector<ActivityModePair> pairs;  // ordering situations
  std::vector<ActivityGroup> groups;    // group selection situations

  std::size_t candidate_count() const { return kind == SituationKind::Ordering ? pairs.size() : groups.size(); }
};

/// Concatenated competition-rank segments, one per situation.
struct PCVector {
  std::vector<std::int32_t> ranks;
  std::vector<std::size_t> offsets;  // start of each segment

  std::size_t size() const { return ranks.size(); }
  friend bool operator==(const PCVector& a, const PCVector& b) { return a.ranks == b.ranks; }
};

/// Hashable identity of a PC vector: equal iff the rank sequences are equal.
struct PCKey {
  std::vector<std::int32_t> ranks;
  friend bool operator==(const PCKey&, const PCKey&) = default;
};

inline PCKey dedup_key(const PCVector& pc) { return PCKey{pc.ranks}; }

struct PCKeyHash {
  std::size_t operator()(const PCKey& k) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto r : k.ranks) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)));
    return static_cast<std::size_t>(h);
  }
};

/// Competition ranks (1 = smallest priority; tied values share the smallest
/// rank of their block) appended to `out`. Ties follow priority_tied.
inline void competition_ranks(std::span<const double> priorities, std::vector<std::int32_t>& out) {
  thread_local std::vector<std::size_t> idx;
  const std::size_t n = priorities.size(), base = out.size();
  out.resize(base + n);
  idx.resize(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return priorities[a] < priorities[b] || (priorities[a] == priorities[b] && a < b);
  });
  double anchor = 0.0;
  std::int32_t rank = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = priorities[idx[k]];
    if (k == 0 || !priority_tied(anchor, v)) {
      anchor = v;
      rank = static_cast<std::int32_t>(k + 1);
    }
    out[base + idx[k]] = rank;
  }
}

/// Phenotypic characterisation of `rules`: the ordering tree ranks the pairs
/// of every ordering situation and the group tree ranks the groups of every
/// group selection situation; rank segments are concatenated in situation order.
template <SchedulingRules Rules>
PCVector characterise(const Rules& rules, std::span<const DecisionSituation> situations) {
  PCVector pc;
  pc.offsets.reserve(situations.size());
  std::vector<double> priorities;
  for (const auto& s : situations) {
    pc.offsets.push_back(pc.ranks.size());
    const DecisionContext ctx{*s.instance, s.state, s.eligible_count};
    priorities.clear();
    if (s.kind == SituationKind::Ordering) {
      for (const auto& p : s.pairs) priorities.push_back(sanitize_priority(static_cast<double>(rules.order_priority(ctx, p))));
    } else {
      for (const auto& g : s.groups) priorities.push_back(sanitize_priority(static_cast<double>(rules.group_priority(ctx, g))));
    }
    competition_ranks(priorities, pc.ranks);
  }
  return pc;
}

/// Candidate attributes of a fixed situation set, computed once, so that
/// characterising a RulePair only evaluates its trees. Gives the same vectors
/// as characterise(rules, situations).
class FrozenSituations {
 public:
  FrozenSituations() = default;
  explicit FrozenSituations(std::span<const DecisionSituation> situations) {
    for (const auto& s : situations) {
      const DecisionContext ctx{*s.instance, s.state, s.eligible_count};
      Entry e{s.kind, {}, {}};
      for (const auto& p : s.pairs) e.ordering.push_back(ordering_attributes(ctx, p));
      for (const auto& g : s.groups) e.group.push_back(group_attributes(ctx, g));
      entries_.push_back(std::move(e));
    }
  }

  std::size_t size() const { return entries_.size(); }

  PCVector characterise(const RulePair& rules) const {
    PCVector pc;
    pc.offsets.reserve(entries_.size());
    std::vector<double> priorities;
    for (const auto& e : entries_) {
      pc.offsets.push_back(pc.ranks.size());
      priorities.clear();
      if (e.kind == SituationKind::Ordering) {
        for (const auto& a : e.ordering) priorities.push_back(rules.ordering.evaluate(a));
      } else {
        for (const auto& a : e.group) priorities.push_back(rules.group.evaluate(a));
      }
      competition_ranks(priorities, pc.ranks);
    }
    return pc;
  }

 private:
  struct Entry {
    SituationKind kind;
    std::vector<OrderingAttributes> ordering;
    std::vector<GroupAttributes> group;
  };
  std::vector<Entry> entries_;
};

struct SamplingOptions {
  std::size_t per_kind = 10;
  std::size_t min_candidates = 10;
  std::size_t group_cap = 256;
};

/// Runs the reference rules with trace recording on each instance and samples
/// `per_kind` decision points of each kind uniformly without replacement. When
/// too few points qualify, the candidate threshold of that kind is lowered one
/// step at a time down to 2 before giving up with SamplingError.
inline std::vector<DecisionSituation> sample_situations(std::span<const std::shared_ptr<const ProjectInstance>> instances,
                                                        const RulePair& reference, const SamplingOptions& options,
                                                        std::uint64_t seed) {
  if (options.per_kind == 0) throw ConfigError("situations.per_kind: must be positive");
  struct Point {
    std::size_t instance;
    const DecisionRecord* record;
  };
  std::vector<ScheduleResult> runs;
  runs.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    runs.push_back(simulate(*instances[i], reference, derive_seed(seed, {0x736974ULL, i}),
                            SimulationOptions{true, options.group_cap}));

  auto qualifying = [&](SituationKind kind, std::size_t threshold) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < runs.size(); ++i)
      for (const auto& rec : *runs[i].decision_trace) {
        const std::size_t count = kind == SituationKind::Ordering ? rec.eligible.size() : rec.groups.size();
        if (count >= threshold) pts.push_back({i, &rec});
      }
    return pts;
  };

  const std::array<SituationKind, 2> kinds{SituationKind::Ordering, SituationKind::GroupSelection};
  std::array<std::vector<Point>, 2> points;
  std::array<std::size_t, 2> thresholds{};
  for (std::size_t k = 0; k < 2; ++k) {
    thresholds[k] = std::max<std::size_t>(options.min_candidates, 2);
    points[k] = qualifying(kinds[k], thresholds[k]);
    while (points[k].size() < options.per_kind && thresholds[k] > 2) points[k] = qualifying(kinds[k], --thresholds[k]);
  }
  const std::size_t scarce = points[1].size() < points[0].size() ? 1 : 0;
  if (points[scarce].size() < options.per_kind) {
    std::ostringstream msg;
    msg << "situation sampling failed: scarcest kind is " << kind_name(kinds[scarce]) << " with "
        << points[scarce].size() << " decision points of >= " << thresholds[scarce] << " candidates, "
        << options.per_kind << " required";
    throw SamplingError(msg.str());
  }

  std::vector<DecisionSituation> out;
  Rng rng(derive_seed(seed, {0x73616d70ULL}));
  for (std::size_t kk = 0; kk < 2; ++kk) {
    const auto kind = kinds[kk];
    const auto& pts = points[kk];
    // Partial Fisher-Yates, then restore chronological order.
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < options.per_kind; ++k) std::swap(idx[k], idx[k + rng.index(idx.size() - k)]);
    idx.resize(options.per_kind);
    std::sort(idx.begin(), idx.end());
    for (auto k : idx) {
      const auto& rec = *pts[k].record;
      DecisionSituation s;
      s.kind = kind;
      s.instance = instances[pts[k].instance];
      s.state = rec.state;
      s.eligible_count = static_cast<int>(rec.eligible.size());
      if (kind == SituationKind::Ordering) {
        s.pairs = rec.eligible;
      } else {
        s.groups = rec.groups;
        std::sort(s.groups.begin(), s.groups.end());
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Situation bundle serialization

inline Json state_to_json(const ProjectState& s) {
  Json status = Json::array();
  for (auto st : s.status) status.push_back(static_cast<int>(st));
  Json running = Json::array();
  for (const auto& r : s.running) running.push_back(Json::array({r.activity, r.mode, r.start, r.finish}));
  return Json{{"time", s.time},           {"status", std::move(status)},      {"running", std::move(running)},
              {"available", s.available}, {"realized", s.realized},           {"finished_count", s.finished_count}};
}

inline ProjectState state_from_json(const Json& j) {
  ProjectState s;
  s.time = j.at("time").get<int>();
  for (const auto& v : j.at("status")) s.status.push_back(static_cast<ActivityStatus>(v.get<int>()));
  for (const auto& r : j.at("running")) s.running.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()});
  s.available = j.at("available").get<std::vector<int>>();
  s.realized = j.at("realized").get<std::vector<int>>();
  s.finished_count = j.at("finished_count").get<int>();
  return s;
}

inline std::string state_digest(const ProjectState& s) {
  std::ostringstream os;
  os << std::hex << hash_label(state_to_json(s).dump());
  return os.str();
}

inline Json situations_to_json(std::span<const DecisionSituation> situations) {
  Json arr = Json::array();
  for (const auto& s : situations) {
    Json cands = Json::array();
    if (s.kind == SituationKind::Ordering)
      for (const auto& p : s.pairs) cands.push_back(detail::pair_json(p));
    else
      for (const auto& g : s.groups) cands.push_back(detail::group_json(g));
    arr.push_back(Json{{"instance_id", s.instance->id()},
                       {"kind", kind_name(s.kind)},
                       {"state_digest", state_digest(s.state)},
                       {"eligible_count", s.eligible_count},
                       {"state", state_to_json(s.state)},
                       {"candidates", std::move(cands)}});
  }
  return Json{{"situations", std::move(arr)}};
}

/// Rebuilds a situation bundle against the instances it was sampled from.
inline std::vector<DecisionSituation> situations_from_json(const Json& j,
                                                           std::span<const std::shared_ptr<const ProjectInstance>> instances) {
  std::map<std::string, std::shared_ptr<const ProjectInstance>> by_id;
  for (const auto& inst : instances) by_id[inst->id()] = inst;
  std::vector<DecisionSituation> out;
  const auto& arr = j.at("situations");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const auto& sj = arr[k];
    const std::string path = "situations[" + std::to_string(k) + "]";
    DecisionSituation s;
    const auto id = sj.at("instance_id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ConfigError(path + ".instance_id: unknown instance '" + id + "'");
    s.instance = it->second;
    const auto kind = sj.at("kind").get<std::string>();
    if (kind == "ordering")
      s.kind = SituationKind::Ordering;
    else if (kind == "group_selection")
      s.kind = SituationKind::GroupSelection;
    else
      throw ConfigError(path + ".kind: unknown kind '" + kind + "'");
    s.state = state_from_json(sj.at("state"));
    if (state_digest(s.state) != sj.at("state_digest").get<std::string>())
      throw ConfigError(path + ".state_digest: does not match the stored state");
    if (s.state.status.size() != s.instance->size()) throw ConfigError(path + ".state: size does not match instance");
    s.eligible_count = sj.at("eligible_count").get<int>();
    for (const auto& c : sj.at("candidates")) {
      if (s.kind == SituationKind::Ordering) {
        s.pairs.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
      } else {
        ActivityGroup g;
        for (const auto& p : c) g.members.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        s.groups.push_back(std::move(g));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace skgp
