#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <vector>

#include "skgp/project.hpp"

namespace skgp {

struct ActivityModePair {
  int activity = 0;
  int mode = 0;

  friend auto operator<=>(const ActivityModePair&, const ActivityModePair&) = default;
};

// Members are kept sorted by activity id; at most one mode per activity.
struct ActivityGroup {
  std::vector<ActivityModePair> members;

  friend auto operator<=>(const ActivityGroup&, const ActivityGroup&) = default;
};

enum class ActivityStatus : std::uint8_t { Pending, Running, Finished };

struct RunningActivity {
  int activity = 0;
  int mode = 0;
  int start = 0;
  int finish = 0;

  friend bool operator==(const RunningActivity&, const RunningActivity&) = default;
};

/// Mutable execution state of one simulation. `available[r]` always equals
/// capacity[r] minus the demand of running activities.
struct ProjectState {
  int time = 0;
  std::vector<ActivityStatus> status;
  std::vector<RunningActivity> running;
  std::vector<int> available;
  std::vector<int> realized;  // realized duration of the started mode, -1 before start
  int finished_count = 0;

  static ProjectState initial(const ProjectInstance& instance) {
    ProjectState s;
    s.status.assign(instance.size(), ActivityStatus::Pending);
    s.available = instance.capacities();
    s.realized.assign(instance.size(), -1);
    return s;
  }

  ActivityStatus status_of(int a) const { return status[static_cast<std::size_t>(a)]; }
  bool done() const { return finished_count == static_cast<int>(status.size()); }

  friend bool operator==(const ProjectState&, const ProjectState&) = default;
};

inline bool predecessors_finished(const ProjectInstance& instance, const ProjectState& state, int a) {
  return std::all_of(instance.activity(a).predecessors.begin(), instance.activity(a).predecessors.end(),
                     [&](int p) { return state.status_of(p) == ActivityStatus::Finished; });
}

inline bool fits(const std::vector<int>& demand, const std::vector<int>& available) {
  for (std::size_t r = 0; r < demand.size(); ++r)
    if (demand[r] > available[r]) return false;
  return true;
}

/// What a rule sees at a decision point.
struct DecisionContext {
  const ProjectInstance& instance;
  const ProjectState& state;
  int eligible_count = 0;
};

}  // namespace skgp
