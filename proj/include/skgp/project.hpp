#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skgp/error.hpp"
#include "skgp/random.hpp"

namespace skgp {

using Json = nlohmann::ordered_json;

/// One execution option of an activity: a duration estimate triple and a
/// per-resource demand vector. Durations are integer time units.
struct Mode {
  int optimistic = 1;
  int expected = 1;
  int pessimistic = 1;
  std::vector<int> demand;

  friend bool operator==(const Mode&, const Mode&) = default;
};

struct Activity {
  int id = 0;
  std::vector<Mode> modes;
  std::vector<int> predecessors;  // sorted, unique

  friend bool operator==(const Activity&, const Activity&) = default;
};

namespace detail {

// Reachability rows: bit j of rows[i] is set iff j is a transitive successor of i.
class Closure {
 public:
  explicit Closure(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  void set(std::size_t i, std::size_t j) { bits_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64); }
  bool test(std::size_t i, std::size_t j) const { return (bits_[i * words_ + j / 64] >> (j % 64)) & 1U; }
  void merge(std::size_t into, std::size_t from) {
    for (std::size_t w = 0; w < words_; ++w) bits_[into * words_ + w] |= bits_[from * words_ + w];
  }
  std::size_t count(std::size_t i) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += static_cast<std::size_t>(std::popcount(bits_[i * words_ + w]));
    return c;
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

// Kahn's algorithm over predecessor lists; empty result signals a cycle.
inline std::vector<int> topological_order(const std::vector<std::vector<int>>& preds) {
  const std::size_t n = preds.size();
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indeg(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (int p : preds[a]) {
      succ[static_cast<std::size_t>(p)].push_back(static_cast<int>(a));
      ++indeg[a];
    }
  }
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> ready;
  for (std::size_t a = n; a-- > 0;)
    if (indeg[a] == 0) ready.push_back(static_cast<int>(a));
  while (!ready.empty()) {
    const int a = ready.back();
    ready.pop_back();
    order.push_back(a);
    for (int s : succ[static_cast<std::size_t>(a)])
      if (--indeg[static_cast<std::size_t>(s)] == 0) ready.push_back(s);
  }
  if (order.size() != n) order.clear();
  return order;
}

inline Closure transitive_closure(const std::vector<std::vector<int>>& preds, const std::vector<int>& topo) {
  Closure c(preds.size());
  // Reverse topological sweep: every successor's row is complete before it is merged.
  std::vector<std::vector<int>> succ(preds.size());
  for (std::size_t a = 0; a < preds.size(); ++a)
    for (int p : preds[a]) succ[static_cast<std::size_t>(p)].push_back(static_cast<int>(a));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const auto a = static_cast<std::size_t>(*it);
    for (int s : succ[a]) {
      c.set(a, static_cast<std::size_t>(s));
      c.merge(a, static_cast<std::size_t>(s));
    }
  }
  return c;
}

inline double order_strength_of(const std::vector<std::vector<int>>& preds) {
  const std::size_t n = preds.size();
  if (n < 2) return 0.0;
  const auto topo = topological_order(preds);
  const auto closure = transitive_closure(preds, topo);
  std::size_t arcs = 0;
  for (std::size_t a = 0; a < n; ++a) arcs += closure.count(a);
  return static_cast<double>(arcs) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace detail

/// An immutable DMRCPSP instance. The constructor validates every structural
/// invariant and precomputes the network data used by heuristic attributes.
class ProjectInstance {
 public:
  ProjectInstance(std::string id, std::vector<int> capacities, std::vector<Activity> activities)
      : id_(std::move(id)), capacities_(std::move(capacities)), activities_(std::move(activities)) {
    validate();
    precompute();
  }

  const std::string& id() const { return id_; }
  const std::vector<int>& capacities() const { return capacities_; }
  const std::vector<Activity>& activities() const { return activities_; }
  const Activity& activity(int a) const { return activities_[static_cast<std::size_t>(a)]; }
  const Mode& mode(int a, int m) const { return activity(a).modes[static_cast<std::size_t>(m)]; }
  std::size_t size() const { return activities_.size(); }
  std::size_t resource_count() const { return capacities_.size(); }
  // Least common multiple of the capacities, or 0 when it exceeds 2^31.
  std::int64_t capacity_lcm() const { return capacity_lcm_; }

  const std::vector<int>& successors(int a) const { return successors_[static_cast<std::size_t>(a)]; }
  const std::vector<int>& topological_order() const { return topo_; }
  // Sum of minimum expected durations over all transitive successors.
  double successor_work(int a) const { return successor_work_[static_cast<std::size_t>(a)]; }
  // Longest path (minimum expected durations) strictly after `a` to project end.
  double tail_length(int a) const { return tail_[static_cast<std::size_t>(a)]; }

  std::vector<std::vector<int>> predecessor_lists() const {
    std::vector<std::vector<int>> preds;
    preds.reserve(activities_.size());
    for (const auto& act : activities_) preds.push_back(act.predecessors);
    return preds;
  }

  friend bool operator==(const ProjectInstance& a, const ProjectInstance& b) {
    return a.id_ == b.id_ && a.capacities_ == b.capacities_ && a.activities_ == b.activities_;
  }

 private:
  void validate() {
    auto fail = [](const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); };
    if (capacities_.empty()) fail("capacities", "at least one resource type is required");
    for (std::size_t r = 0; r < capacities_.size(); ++r)
      if (capacities_[r] <= 0) fail("capacities[" + std::to_string(r) + "]", "capacity must be positive");
    if (activities_.empty()) fail("activities", "at least one activity is required");
    const auto n = static_cast<int>(activities_.size());
    for (std::size_t a = 0; a < activities_.size(); ++a) {
      auto& act = activities_[a];
      const std::string path = "activities[" + std::to_string(a) + "]";
      if (act.id != static_cast<int>(a)) fail(path + ".id", "expected " + std::to_string(a));
      if (act.modes.empty()) fail(path + ".modes", "at least one mode is required");
      for (std::size_t m = 0; m < act.modes.size(); ++m) {
        const auto& md = act.modes[m];
        const std::string mp = path + ".modes[" + std::to_string(m) + "]";
        if (md.optimistic <= 0) fail(mp + ".opt", "must be positive");
        if (md.expected < md.optimistic) fail(mp + ".exp", "must be >= opt");
        if (md.pessimistic < md.expected) fail(mp + ".pes", "must be >= exp");
        if (md.demand.size() != capacities_.size())
          fail(mp + ".demand", "length " + std::to_string(md.demand.size()) + " != resource count " +
                                   std::to_string(capacities_.size()));
        for (std::size_t r = 0; r < md.demand.size(); ++r) {
          if (md.demand[r] < 0) fail(mp + ".demand[" + std::to_string(r) + "]", "must be non-negative");
          if (md.demand[r] > capacities_[r])
            fail(mp + ".demand[" + std::to_string(r) + "]", "exceeds capacity " + std::to_string(capacities_[r]));
        }
      }
      std::sort(act.predecessors.begin(), act.predecessors.end());
      for (std::size_t k = 0; k < act.predecessors.size(); ++k) {
        const int p = act.predecessors[k];
        const std::string pp = path + ".predecessors[" + std::to_string(k) + "]";
        if (p < 0 || p >= n) fail(pp, "unknown activity " + std::to_string(p));
        if (p == static_cast<int>(a)) fail(pp, "self-dependency");
        if (k > 0 && act.predecessors[k - 1] == p) fail(pp, "duplicate predecessor " + std::to_string(p));
      }
    }
    topo_ = detail::topological_order(predecessor_lists());
    if (topo_.empty()) fail("activities", "precedence relation contains a cycle");
  }

  void precompute() {
    const std::size_t n = activities_.size();
    capacity_lcm_ = 1;
    for (int c : capacities_) {
      capacity_lcm_ = std::lcm(capacity_lcm_, std::int64_t{c});
      if (capacity_lcm_ > (std::int64_t{1} << 31)) {
        capacity_lcm_ = 0;
        break;
      }
    }
    successors_.assign(n, {});
    for (const auto& act : activities_)
      for (int p : act.predecessors) successors_[static_cast<std::size_t>(p)].push_back(act.id);
    std::vector<double> min_exp(n);
    for (std::size_t a = 0; a < n; ++a) {
      int best = activities_[a].modes.front().expected;
      for (const auto& m : activities_[a].modes) best = std::min(best, m.expected);
      min_exp[a] = best;
    }
    tail_.assign(n, 0.0);
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      const auto a = static_cast<std::size_t>(*it);
      for (int s : successors_[a]) tail_[a] = std::max(tail_[a], min_exp[static_cast<std::size_t>(s)] + tail_[static_cast<std::size_t>(s)]);
    }
    const auto closure = detail::transitive_closure(predecessor_lists(), topo_);
    successor_work_.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (closure.test(a, b)) successor_work_[a] += min_exp[b];
  }

  std::string id_;
  std::vector<int> capacities_;
  std::vector<Activity> activities_;
  std::vector<std::vector<int>> successors_;
  std::vector<int> topo_;
  std::vector<double> successor_work_;
  std::vector<double> tail_;
  std::int64_t capacity_lcm_ = 1;
};

/// Density of the transitive closure: |closure arcs| / (n(n-1)/2).
inline double compute_order_strength(const ProjectInstance& instance) {
  return detail::order_strength_of(instance.predecessor_lists());
}

/// Resource-free critical path using each activity's smallest optimistic duration.
inline int lower_bound(const ProjectInstance& instance) {
  const std::size_t n = instance.size();
  std::vector<int> finish(n, 0);
  int best = 0;
  for (int a : instance.topological_order()) {
    int dur = instance.activity(a).modes.front().optimistic;
    for (const auto& m : instance.activity(a).modes) dur = std::min(dur, m.optimistic);
    int start = 0;
    for (int p : instance.activity(a).predecessors) start = std::max(start, finish[static_cast<std::size_t>(p)]);
    finish[static_cast<std::size_t>(a)] = start + dur;
    best = std::max(best, start + dur);
  }
  return best;
}

/// Triangular draw on [optimistic, pessimistic] peaking at expected, rounded
/// to the nearest integer and clamped to the range. `u` is a uniform variate in [0, 1).
inline int sample_duration(const Mode& mode, double u) {
  const double lo = mode.optimistic;
  const double peak = mode.expected;
  const double hi = mode.pessimistic;
  if (mode.optimistic == mode.pessimistic) return mode.optimistic;
  const double split = (peak - lo) / (hi - lo);
  const double x = u < split ? lo + std::sqrt(u * (hi - lo) * (peak - lo))
                             : hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - peak));
  const auto rounded = static_cast<int>(std::lround(x));
  return std::clamp(rounded, mode.optimistic, mode.pessimistic);
}

inline int sample_duration(const Mode& mode, Rng& rng) { return sample_duration(mode, rng.uniform01()); }

// Realized duration of (activity, mode) under a duration seed. Keyed by the
// pair rather than by draw order, so every rule sees the same realizations.
inline int realized_duration(const Mode& mode, std::uint64_t seed, int activity, int mode_index) {
  const std::uint64_t bits = derive_seed(seed, {static_cast<std::uint64_t>(activity), static_cast<std::uint64_t>(mode_index)});
  return sample_duration(mode, static_cast<double>(bits >> 11) * 0x1.0p-53);
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const ProjectInstance& instance) {
  Json acts = Json::array();
  for (const auto& a : instance.activities()) {
    Json modes = Json::array();
    for (const auto& m : a.modes)
      modes.push_back(Json{{"opt", m.optimistic}, {"exp", m.expected}, {"pes", m.pessimistic}, {"demand", m.demand}});
    acts.push_back(Json{{"id", a.id}, {"predecessors", a.predecessors}, {"modes", std::move(modes)}});
  }
  return Json{{"id", instance.id()}, {"capacities", instance.capacities()}, {"activities", std::move(acts)}};
}

namespace detail {

template <typename T>
T json_field(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key + ": missing field");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

}  // namespace detail

/// Parses and validates an instance; errors name the offending field path.
inline ProjectInstance instance_from_json(const Json& j) {
  const std::string root = "instance";
  auto id = detail::json_field<std::string>(j, "id", root);
  auto caps = detail::json_field<std::vector<int>>(j, "capacities", root);
  auto acts_json = detail::json_field<Json>(j, "activities", root);
  if (!acts_json.is_array()) throw ConfigError("activities: expected an array");
  std::vector<Activity> acts;
  for (std::size_t a = 0; a < acts_json.size(); ++a) {
    const std::string path = "activities[" + std::to_string(a) + "]";
    const auto& aj = acts_json[a];
    Activity act;
    act.id = detail::json_field<int>(aj, "id", path);
    act.predecessors = detail::json_field<std::vector<int>>(aj, "predecessors", path);
    auto modes_json = detail::json_field<Json>(aj, "modes", path);
    if (!modes_json.is_array()) throw ConfigError(path + ".modes: expected an array");
    for (std::size_t m = 0; m < modes_json.size(); ++m) {
      const std::string mp = path + ".modes[" + std::to_string(m) + "]";
      Mode md;
      md.optimistic = detail::json_field<int>(modes_json[m], "opt", mp);
      md.expected = detail::json_field<int>(modes_json[m], "exp", mp);
      md.pessimistic = detail::json_field<int>(modes_json[m], "pes", mp);
      md.demand = detail::json_field<std::vector<int>>(modes_json[m], "demand", mp);
      act.modes.push_back(std::move(md));
    }
    acts.push_back(std::move(act));
  }
  return ProjectInstance(std::move(id), std::move(caps), std::move(acts));
}

inline ProjectInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace skgp
