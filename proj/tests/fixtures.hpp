#pragma once

// Hand-built instances shared by the unit suites.

#include <memory>
#include <vector>

#include "skgp/project.hpp"

namespace skgp::testing {

inline Mode fixed_mode(int duration, std::vector<int> demand) { return Mode{duration, duration, duration, std::move(demand)}; }

inline Activity make_activity(int id, std::vector<Mode> modes, std::vector<int> preds = {}) {
  return Activity{id, std::move(modes), std::move(preds)};
}

// 0 -> 1 -> ... -> n-1, one resource of capacity 10, each activity demand 1.
inline ProjectInstance chain(const std::vector<int>& durations, int modes = 1) {
  std::vector<Activity> acts;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    std::vector<Mode> ms;
    for (int m = 0; m < modes; ++m) ms.push_back(fixed_mode(durations[i] + m, {1}));
    acts.push_back(make_activity(static_cast<int>(i), std::move(ms), i == 0 ? std::vector<int>{} : std::vector<int>{static_cast<int>(i) - 1}));
  }
  return ProjectInstance("chain", {10}, std::move(acts));
}

// A -> B, A -> C, B -> D, C -> D with the given fixed durations.
inline ProjectInstance diamond(int a, int b, int c, int d, std::vector<int> caps = {10}) {
  const std::vector<int> dem(caps.size(), 1);
  std::vector<Activity> acts{make_activity(0, {fixed_mode(a, dem)}), make_activity(1, {fixed_mode(b, dem)}, {0}),
                             make_activity(2, {fixed_mode(c, dem)}, {0}), make_activity(3, {fixed_mode(d, dem)}, {1, 2})};
  return ProjectInstance("diamond", std::move(caps), std::move(acts));
}

// Independent activities with fixed durations.
inline ProjectInstance independent(const std::vector<int>& durations, int capacity = 100) {
  std::vector<Activity> acts;
  for (std::size_t i = 0; i < durations.size(); ++i) acts.push_back(make_activity(static_cast<int>(i), {fixed_mode(durations[i], {1})}));
  return ProjectInstance("independent", {capacity}, std::move(acts));
}

template <typename T>
std::shared_ptr<const ProjectInstance> share(T&& inst) {
  return std::make_shared<const ProjectInstance>(std::forward<T>(inst));
}

}  // namespace skgp::testing
