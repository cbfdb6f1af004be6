#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skgp/error.hpp"

namespace skgp {

enum class Role : std::uint8_t { Ordering, Group };

// Primitive set. Ordering terminals describe one activity-mode pair, group
// terminals describe one candidate activity group.
enum class Op : std::uint8_t {
  Add,
  Sub,
  Mul,
  Div,
  Min,
  Max,
  Neg,
  Const,
  // ordering terminals
  ExpDur,
  OptDur,
  PesDur,
  DemMax,
  DemMean,
  SuccCount,
  SuccWork,
  CpToEnd,
  EligibleCount,
  ResUtil,
  TimeNow,
  // group terminals
  GrpSize,
  GrpSumDur,
  GrpMaxDur,
  GrpSumDem,
  GrpSumSucc,
  GrpSlack,
};

inline constexpr std::size_t kOrderingAttributeCount = 11;
inline constexpr std::size_t kGroupAttributeCount = 6;
using OrderingAttributes = std::array<double, kOrderingAttributeCount>;
using GroupAttributes = std::array<double, kGroupAttributeCount>;

inline constexpr std::array<Op, 7> kFunctions{Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Min, Op::Max, Op::Neg};
inline constexpr std::array<Op, kOrderingAttributeCount> kOrderingTerminals{
    Op::ExpDur,   Op::OptDur,  Op::PesDur,        Op::DemMax,  Op::DemMean, Op::SuccCount,
    Op::SuccWork, Op::CpToEnd, Op::EligibleCount, Op::ResUtil, Op::TimeNow};
inline constexpr std::array<Op, kGroupAttributeCount> kGroupTerminals{Op::GrpSize,   Op::GrpSumDur,  Op::GrpMaxDur,
                                                                      Op::GrpSumDem, Op::GrpSumSucc, Op::GrpSlack};

constexpr int arity(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Min:
    case Op::Max:
      return 2;
    case Op::Neg:
      return 1;
    default:
      return 0;
  }
}

constexpr bool is_ordering_terminal(Op op) { return op >= Op::ExpDur && op <= Op::TimeNow; }
constexpr bool is_group_terminal(Op op) { return op >= Op::GrpSize && op <= Op::GrpSlack; }

// Index into the attribute array of the terminal's role.
constexpr std::size_t attribute_index(Op op) {
  return is_group_terminal(op) ? static_cast<std::size_t>(op) - static_cast<std::size_t>(Op::GrpSize)
                               : static_cast<std::size_t>(op) - static_cast<std::size_t>(Op::ExpDur);
}

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Min: return "min";
    case Op::Max: return "max";
    case Op::Neg: return "neg";
    case Op::Const: return "const";
    case Op::ExpDur: return "exp_dur";
    case Op::OptDur: return "opt_dur";
    case Op::PesDur: return "pes_dur";
    case Op::DemMax: return "dem_max";
    case Op::DemMean: return "dem_mean";
    case Op::SuccCount: return "succ_count";
    case Op::SuccWork: return "succ_work";
    case Op::CpToEnd: return "cp_to_end";
    case Op::EligibleCount: return "eligible_count";
    case Op::ResUtil: return "res_util";
    case Op::TimeNow: return "time_now";
    case Op::GrpSize: return "grp_size";
    case Op::GrpSumDur: return "grp_sum_dur";
    case Op::GrpMaxDur: return "grp_max_dur";
    case Op::GrpSumDem: return "grp_sum_dem";
    case Op::GrpSumSucc: return "grp_sum_succ";
    case Op::GrpSlack: return "grp_slack";
  }
  return "?";
}

/// ÷(a, b) = a / b when |b| > 1e-9, otherwise 1.
inline double protected_div(double a, double b) { return std::abs(b) > 1e-9 ? a / b : 1.0; }

struct Node {
  Op op = Op::Const;
  double value = 0.0;  // only meaningful for Op::Const

  friend bool operator==(const Node&, const Node&) = default;
};

/// Expression tree stored in prefix order. Depth counts edges: a lone
/// terminal has depth 0.
class Tree {
 public:
  Tree() = default;
  Tree(Role role, std::vector<Node> nodes) : role_(role), nodes_(std::move(nodes)) {}

  Role role() const { return role_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  // One past the last node of the subtree rooted at `i`.
  std::size_t subtree_end(std::size_t i) const {
    int open = 1;
    while (open > 0) open += arity(nodes_[i++].op) - 1;
    return i;
  }

  int depth() const { return nodes_.empty() ? 0 : depth_from(0); }

  // Depth of the node at position `i` below the root.
  int level_of(std::size_t target) const {
    std::vector<int> pending;  // remaining child slots at each open level
    int level = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (i == target) return level;
      const int a = arity(nodes_[i].op);
      if (a > 0) {
        pending.push_back(a);
        ++level;
      } else {
        while (!pending.empty() && --pending.back() == 0) {
          pending.pop_back();
          --level;
        }
      }
    }
    return level;
  }

  // Height of the subtree rooted at `i`.
  int depth_from(std::size_t i) const {
    int best = 0;
    std::vector<int> pending;
    int level = 0;
    const std::size_t end = subtree_end(i);
    for (std::size_t k = i; k < end; ++k) {
      best = std::max(best, level);
      const int a = arity(nodes_[k].op);
      if (a > 0) {
        pending.push_back(a);
        ++level;
      } else {
        while (!pending.empty() && --pending.back() == 0) {
          pending.pop_back();
          --level;
        }
      }
    }
    return best;
  }

  template <std::size_t N>
  double evaluate(const std::array<double, N>& attributes) const {
    std::size_t pos = 0;
    const double v = eval_at(pos, std::span<const double>(attributes));
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }

  Tree with_subtree(std::size_t at, const std::vector<Node>& replacement) const {
    std::vector<Node> out;
    out.reserve(nodes_.size() + replacement.size());
    out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(at));
    out.insert(out.end(), replacement.begin(), replacement.end());
    out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(at)), nodes_.end());
    return Tree(role_, std::move(out));
  }

  std::vector<Node> subtree(std::size_t at) const {
    return {nodes_.begin() + static_cast<std::ptrdiff_t>(at), nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(at))};
  }

  std::string to_string() const {
    std::string out;
    std::size_t pos = 0;
    if (!nodes_.empty()) print_at(pos, out);
    return out;
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  double eval_at(std::size_t& pos, std::span<const double> attrs) const {
    const Node& n = nodes_[pos++];
    switch (n.op) {
      case Op::Add: {
        const double a = eval_at(pos, attrs);
        return a + eval_at(pos, attrs);
      }
      case Op::Sub: {
        const double a = eval_at(pos, attrs);
        return a - eval_at(pos, attrs);
      }
      case Op::Mul: {
        const double a = eval_at(pos, attrs);
        return a * eval_at(pos, attrs);
      }
      case Op::Div: {
        const double a = eval_at(pos, attrs);
        return protected_div(a, eval_at(pos, attrs));
      }
      case Op::Min: {
        const double a = eval_at(pos, attrs);
        const double b = eval_at(pos, attrs);
        return b < a ? b : a;
      }
      case Op::Max: {
        const double a = eval_at(pos, attrs);
        const double b = eval_at(pos, attrs);
        return b > a ? b : a;
      }
      case Op::Neg:
        return -eval_at(pos, attrs);
      case Op::Const:
        return n.value;
      default:
        return attrs[attribute_index(n.op)];
    }
  }

  void print_at(std::size_t& pos, std::string& out) const {
    const Node& n = nodes_[pos++];
    if (n.op == Op::Const) {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof(buf), n.value);
      out.append(buf, res.ptr);
      return;
    }
    const int a = arity(n.op);
    if (a == 0) {
      out += op_name(n.op);
      return;
    }
    out += '(';
    out += op_name(n.op);
    for (int k = 0; k < a; ++k) {
      out += ' ';
      print_at(pos, out);
    }
    out += ')';
  }

  Role role_ = Role::Ordering;
  std::vector<Node> nodes_;
};

namespace detail {

class SexprParser {
 public:
  SexprParser(std::string_view text, Role role) : text_(text), role_(role) {}

  Tree parse() {
    std::vector<Node> nodes;
    parse_node(nodes);
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return Tree(role_, std::move(nodes));
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("tree parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view token() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')')
      ++pos_;
    if (start == pos_) fail("expected a symbol");
    return text_.substr(start, pos_ - start);
  }

  static bool lookup(std::string_view name, Op& op) {
    for (int k = 0; k <= static_cast<int>(Op::GrpSlack); ++k) {
      const auto candidate = static_cast<Op>(k);
      if (candidate != Op::Const && op_name(candidate) == name) {
        op = candidate;
        return true;
      }
    }
    return false;
  }

  void parse_node(std::vector<Node>& out) {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] == '(') {
      ++pos_;
      const auto name = token();
      Op op;
      if (!lookup(name, op) || arity(op) == 0) fail("unknown function '" + std::string(name) + "'");
      out.push_back(Node{op, 0.0});
      for (int k = 0; k < arity(op); ++k) parse_node(out);
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return;
    }
    const auto name = token();
    Op op;
    if (lookup(name, op)) {
      if (arity(op) != 0) fail("function '" + std::string(name) + "' used as a terminal");
      if ((role_ == Role::Ordering && !is_ordering_terminal(op)) || (role_ == Role::Group && !is_group_terminal(op)))
        fail("terminal '" + std::string(name) + "' not valid for this rule role");
      out.push_back(Node{op, 0.0});
      return;
    }
    double value = 0.0;
    auto res = std::from_chars(name.data(), name.data() + name.size(), value);
    if (res.ec != std::errc{} || res.ptr != name.data() + name.size()) fail("unknown symbol '" + std::string(name) + "'");
    out.push_back(Node{Op::Const, value});
  }

  std::string_view text_;
  Role role_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a prefix S-expression such as `(div exp_dur (add 1 succ_count))`.
inline Tree parse_tree(std::string_view text, Role role) { return detail::SexprParser(text, role).parse(); }

}  // namespace skgp
