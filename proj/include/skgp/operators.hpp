#pragma once

#include <utility>
#include <vector>

#include "skgp/random.hpp"
#include "skgp/rules.hpp"
#include "skgp/tree.hpp"

namespace skgp {

struct TreeLimits {
  int max_depth = 8;
  int init_min_depth = 2;
  int init_max_depth = 6;
  int mutation_max_depth = 4;
  int retries = 10;
  double internal_probability = 0.9;  // crossover point bias towards functions
};

namespace detail {

inline Node random_terminal(Role role, Rng& rng) {
  const std::size_t count = role == Role::Ordering ? kOrderingTerminals.size() : kGroupTerminals.size();
  const std::size_t pick = rng.index(count + 1);
  if (pick == count) return Node{Op::Const, rng.uniform(-1.0, 1.0)};
  return Node{role == Role::Ordering ? kOrderingTerminals[pick] : kGroupTerminals[pick], 0.0};
}

inline void grow_into(std::vector<Node>& out, Role role, int depth, int height, bool full, Rng& rng) {
  const std::size_t terminals = (role == Role::Ordering ? kOrderingTerminals.size() : kGroupTerminals.size()) + 1;
  const double terminal_ratio = static_cast<double>(terminals) / static_cast<double>(terminals + kFunctions.size());
  const bool leaf = depth >= height || (!full && rng.uniform01() < terminal_ratio);
  if (leaf) {
    out.push_back(random_terminal(role, rng));
    return;
  }
  const Op f = kFunctions[rng.index(kFunctions.size())];
  out.push_back(Node{f, 0.0});
  for (int k = 0; k < arity(f); ++k) grow_into(out, role, depth + 1, height, full, rng);
}

}  // namespace detail

/// Random tree of exactly `height` levels (full) or at most `height` (grow).
inline Tree random_tree(Role role, int height, bool full, Rng& rng) {
  std::vector<Node> nodes;
  detail::grow_into(nodes, role, 0, height, full, rng);
  return Tree(role, std::move(nodes));
}

/// Ramped half-and-half: depth drawn from the initial range, full or grow
/// with equal probability, independently for each tree.
inline RulePair random_rules(const TreeLimits& limits, Rng& rng) {
  auto one = [&](Role role) {
    const auto h = static_cast<int>(rng.uniform_int(limits.init_min_depth, limits.init_max_depth));
    return random_tree(role, h, rng.bernoulli(0.5), rng);
  };
  Tree ordering = one(Role::Ordering);
  Tree group = one(Role::Group);
  return RulePair{std::move(ordering), std::move(group)};
}

// Node index, biased towards internal nodes when the tree has any.
inline std::size_t pick_node(const Tree& tree, double internal_probability, Rng& rng) {
  std::vector<std::size_t> internal, leaves;
  for (std::size_t i = 0; i < tree.size(); ++i) (arity(tree.nodes()[i].op) > 0 ? internal : leaves).push_back(i);
  if (!internal.empty() && rng.uniform01() < internal_probability) return internal[rng.index(internal.size())];
  return leaves[rng.index(leaves.size())];
}

inline Tree& tree_of(RulePair& r, int which) { return which == 0 ? r.ordering : r.group; }
inline const Tree& tree_of(const RulePair& r, int which) { return which == 0 ? r.ordering : r.group; }

/// Subtree crossover on one randomly chosen tree of the pair. Oversize
/// children are rejected and new points drawn; after `retries` failures the
/// parent is copied unchanged.
inline std::pair<RulePair, RulePair> crossover(const RulePair& a, const RulePair& b, const TreeLimits& limits, Rng& rng) {
  const int which = static_cast<int>(rng.index(2));
  const Tree& ta = tree_of(a, which);
  const Tree& tb = tree_of(b, which);
  RulePair ca = a, cb = b;
  bool done_a = false, done_b = false;
  for (int attempt = 0; attempt < limits.retries && !(done_a && done_b); ++attempt) {
    const std::size_t i = pick_node(ta, limits.internal_probability, rng);
    const std::size_t j = pick_node(tb, limits.internal_probability, rng);
    if (!done_a) {
      Tree t = ta.with_subtree(i, tb.subtree(j));
      if (t.depth() <= limits.max_depth) {
        tree_of(ca, which) = std::move(t);
        done_a = true;
      }
    }
    if (!done_b) {
      Tree t = tb.with_subtree(j, ta.subtree(i));
      if (t.depth() <= limits.max_depth) {
        tree_of(cb, which) = std::move(t);
        done_b = true;
      }
    }
  }
  return {std::move(ca), std::move(cb)};
}

/// Subtree mutation on one randomly chosen tree: a uniformly chosen node is
/// replaced by a freshly grown subtree.
inline RulePair mutate(const RulePair& parent, const TreeLimits& limits, Rng& rng) {
  const int which = static_cast<int>(rng.index(2));
  const Tree& t = tree_of(parent, which);
  RulePair child = parent;
  for (int attempt = 0; attempt < limits.retries; ++attempt) {
    const std::size_t i = rng.index(t.size());
    const auto h = static_cast<int>(rng.uniform_int(0, limits.mutation_max_depth));
    Tree replacement = random_tree(t.role(), h, false, rng);
    Tree out = t.with_subtree(i, replacement.nodes());
    if (out.depth() <= limits.max_depth) {
      tree_of(child, which) = std::move(out);
      break;
    }
  }
  return child;
}

}  // namespace skgp
