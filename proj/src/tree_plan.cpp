#include "csdp/tree_plan.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "csdp/errors.hpp"

namespace csdp {
namespace {

// ceil(log2(n)) for n >= 1.
int ceil_log2(std::int64_t n) {
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n) - 1));
}

// x^e clamped to cap, without overflow.
std::int64_t ipow_clamped(std::int64_t x, int e, std::int64_t cap) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > cap / x) return cap;
    r *= x;
  }
  return r;
}

// Smallest x >= 2 with x^e >= target.
std::int64_t int_root_ceil(std::int64_t target, int e) {
  // Start from the floating-point root and fix up; pow() can land one off.
  auto guess = static_cast<std::int64_t>(
      std::floor(std::pow(static_cast<double>(target), 1.0 / e)));
  std::int64_t x = std::max<std::int64_t>(2, guess - 2);
  while (ipow_clamped(x, e, target) < target) ++x;
  return x;
}

void index_levels(TreePlan& plan) {
  plan.level_index.assign(static_cast<std::size_t>(plan.levels) + 1, {});
  for (const PlanNode& nd : plan.nodes) {
    plan.level_index[static_cast<std::size_t>(nd.level)].push_back(nd.node_id);
  }
}

}  // namespace

std::int64_t TreePlan::t_closed(std::int64_t t) const {
  if (t >= padded_horizon) return padded_horizon;
  if (t < low_degree) return 0;
  return low_degree * (t / low_degree);
}

TreePlan build_plan(std::int64_t n, int k) {
  if (n < 2) throw InvalidArgument("build_plan: n must be >= 2");
  if (k < 1) throw InvalidArgument("build_plan: k must be >= 1");
  int k_max = ceil_log2(n) - 1;
  if (k > k_max) {
    throw InvalidArgument("build_plan: k must be <= ceil(log2(n)) - 1 = " +
                          std::to_string(k_max));
  }

  TreePlan plan;
  plan.horizon = n;
  plan.padded_horizon = n;
  plan.requested_levels = k;
  plan.binary_mode = false;
  plan.low_degree = int_root_ceil(n, 2 * k + 1);
  // d is the smallest integer with d^k * d_low >= n; since d^k is an integer
  // this is the same as d^k >= ceil(n / d_low).
  {
    std::int64_t target = (n + plan.low_degree - 1) / plan.low_degree;
    auto guess = static_cast<std::int64_t>(std::floor(
        std::pow(static_cast<double>(n) / static_cast<double>(plan.low_degree),
                 1.0 / k)));
    std::int64_t d = std::max<std::int64_t>(2, guess - 2);
    while (ipow_clamped(d, k, target) < target) ++d;
    plan.degree = d;
  }

  // Level 1: consecutive blocks of d_low users, last block possibly smaller.
  std::vector<PlanNode> current;
  for (std::int64_t start = 1; start <= n; start += plan.low_degree) {
    PlanNode nd;
    nd.level = 1;
    nd.first = start;
    nd.last = std::min(start + plan.low_degree - 1, n);
    current.push_back(nd);
  }
  std::vector<std::vector<PlanNode>> levels{current};

  // Levels 2..k group d children each. A level that would collapse into a
  // single all-users node is the root; the root never runs a mechanism, so
  // construction stops below it.
  for (int level = 2; level <= k; ++level) {
    std::vector<PlanNode> next;
    for (std::size_t j = 0; j < current.size(); j += static_cast<std::size_t>(plan.degree)) {
      std::size_t end = std::min(current.size(), j + static_cast<std::size_t>(plan.degree));
      PlanNode nd;
      nd.level = level;
      nd.first = current[j].first;
      nd.last = current[end - 1].last;
      next.push_back(nd);
    }
    if (next.size() == 1 && next[0].first == 1 && next[0].last == n) break;
    levels.push_back(next);
    current = std::move(next);
  }

  plan.levels = static_cast<int>(levels.size());
  for (const auto& lv : levels) {
    for (const PlanNode& nd : lv) {
      PlanNode withid = nd;
      withid.node_id = plan.nodes.size();
      plan.nodes.push_back(withid);
    }
  }
  index_levels(plan);
  return plan;
}

TreePlan build_binary_plan(std::int64_t n) {
  if (n < 3) throw InvalidArgument("build_binary_plan: n must be >= 3");
  std::int64_t padded = static_cast<std::int64_t>(
      std::bit_ceil(static_cast<std::uint64_t>(n)));
  int log_n = ceil_log2(padded);  // exact log2 of padded

  TreePlan plan;
  plan.horizon = n;
  plan.padded_horizon = padded;
  plan.requested_levels = log_n - 1;
  plan.levels = log_n - 1;
  plan.degree = 2;
  plan.low_degree = 2;
  plan.binary_mode = true;

  for (int level = 1; level < log_n; ++level) {
    std::int64_t size = std::int64_t{1} << level;
    for (std::int64_t start = 1; start <= padded; start += size) {
      PlanNode nd;
      nd.node_id = plan.nodes.size();
      nd.level = level;
      nd.first = start;
      nd.last = start + size - 1;
      plan.nodes.push_back(nd);
    }
  }
  index_levels(plan);
  return plan;
}

std::vector<std::uint64_t> vstar(const TreePlan& plan, std::int64_t t) {
  if (t < 0 || t > plan.padded_horizon) {
    throw InvalidArgument("vstar: t out of range");
  }
  std::int64_t closed_end = plan.t_closed(t);
  std::vector<std::uint64_t> cover;
  std::int64_t cursor = 1;
  while (cursor <= closed_end) {
    const PlanNode* best = nullptr;
    for (int level = plan.levels; level >= 1; --level) {
      const auto& ids = plan.level_index[static_cast<std::size_t>(level)];
      // Nodes are ordered by `first`; find one starting exactly at cursor.
      auto it = std::lower_bound(ids.begin(), ids.end(), cursor,
                                 [&](std::uint64_t id, std::int64_t c) {
                                   return plan.node(id).first < c;
                                 });
      if (it == ids.end()) continue;
      const PlanNode& nd = plan.node(*it);
      if (nd.first != cursor || nd.close_time() > t) continue;
      best = &nd;
      break;
    }
    if (best == nullptr) {
      throw ProtocolViolation("vstar: no closed node starts at cursor " +
                              std::to_string(cursor));
    }
    cover.push_back(best->node_id);
    cursor = best->last + 1;
  }
  return cover;
}

std::size_t max_cover_size(const TreePlan& plan, std::int64_t up_to) {
  if (up_to <= 0 || up_to > plan.padded_horizon) up_to = plan.padded_horizon;
  std::size_t best = 0;
  // The cover only changes when a level-1 node closes.
  for (std::int64_t t = plan.low_degree; t <= up_to; t += plan.low_degree) {
    best = std::max(best, vstar(plan, t).size());
  }
  best = std::max(best, vstar(plan, up_to).size());
  return best;
}

std::vector<ScheduleEntry> schedule(const TreePlan& plan) {
  std::vector<ScheduleEntry> sched(static_cast<std::size_t>(plan.padded_horizon) + 1);
  // `nodes` is ordered by (level, first), so appending in order keeps each
  // per-time list sorted by level.
  for (const PlanNode& nd : plan.nodes) {
    sched[static_cast<std::size_t>(nd.open_time())].activations.push_back(nd.node_id);
    sched[static_cast<std::size_t>(nd.close_time())].executions.push_back(nd.node_id);
  }
  return sched;
}

std::string plan_to_json(const TreePlan& plan) {
  std::ostringstream out;
  out << "{\"horizon\":" << plan.horizon
      << ",\"padded_horizon\":" << plan.padded_horizon
      << ",\"requested_levels\":" << plan.requested_levels
      << ",\"levels\":" << plan.levels << ",\"degree\":" << plan.degree
      << ",\"low_degree\":" << plan.low_degree
      << ",\"binary_mode\":" << (plan.binary_mode ? "true" : "false")
      << ",\"nodes\":[";
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const PlanNode& nd = plan.nodes[i];
    if (i) out << ",";
    out << "{\"id\":" << nd.node_id << ",\"level\":" << nd.level
        << ",\"first\":" << nd.first << ",\"last\":" << nd.last << "}";
  }
  out << "]}";
  return out.str();
}

}  // namespace csdp
