#ifndef CSDP_TREE_PLAN_HPP
#define CSDP_TREE_PLAN_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace csdp {

// One internal tree node: a contiguous block of users (1-based, inclusive)
// served by the shuffler slot of its level. Its mechanism is activated when
// the first user arrives and executed when the last one has submitted.
struct PlanNode {
  std::uint64_t node_id = 0;
  int level = 0;           // 1 = smallest batches
  std::int64_t first = 0;  // leftmost user
  std::int64_t last = 0;   // rightmost user

  std::int64_t open_time() const { return first; }
  std::int64_t close_time() const { return last; }
  std::int64_t size() const { return last - first + 1; }
};

// Static batch plan for one run. Nodes are sorted by (level, first) and
// node_id is the position in `nodes`, so ids are stable for a given (n, k).
//
// `requested_levels` is the number of shuffler slots the caller asked for and
// is what budgets are split by; `levels` is the number actually materialized
// (lower only when a level would collapse to a single node spanning every
// user, which is the root and never gets a mechanism).
struct TreePlan {
  std::int64_t horizon = 0;         // n as requested
  std::int64_t padded_horizon = 0;  // n rounded up to a power of two in binary mode
  int requested_levels = 0;         // k
  int levels = 0;                   // materialized levels (<= k)
  std::int64_t degree = 0;          // d: children per node above level 1
  std::int64_t low_degree = 0;      // d_low: users per level-1 node
  bool binary_mode = false;
  std::vector<PlanNode> nodes;

  // node ids per level (1-based level index), ordered by `first`.
  std::vector<std::vector<std::uint64_t>> level_index;

  const PlanNode& node(std::uint64_t id) const { return nodes[id]; }

  // End of the last level-1 batch closed by time t (0 if none). Coincides
  // with low_degree * floor(t / low_degree) except when the final level-1
  // node is ragged and has closed (possible only at t = padded_horizon).
  std::int64_t t_closed(std::int64_t t) const;
};

// General-mode plan: d_low = ceil(n^(1/(2k+1))), d = ceil((n/d_low)^(1/k)),
// level-1 nodes of d_low consecutive users (last may be smaller), every level
// above grouping d children (last may have fewer).
TreePlan build_plan(std::int64_t n, int k);

// Binary-mode plan: n padded to the next power of two, d = d_low = 2, levels
// 1..log2(n_padded)-1. Phantom users beyond n submit zeros.
TreePlan build_binary_plan(std::int64_t n);

// Greedy cover of [1 .. t_closed(t)] by the highest-level nodes closed by
// time t: repeatedly take the largest closed node starting at the cursor.
// Returns node ids in left-to-right range order; t = 0 (or any t before the
// first batch closes) has the empty cover.
std::vector<std::uint64_t> vstar(const TreePlan& plan, std::int64_t t);

// Largest cover size over times 1..up_to (up_to <= 0 means the padded
// horizon). Bounds the number of noise terms in any published output.
std::size_t max_cover_size(const TreePlan& plan, std::int64_t up_to = 0);

// Per-time activation and execution lists, index 1..padded_horizon.
struct ScheduleEntry {
  std::vector<std::uint64_t> activations;  // nodes opening at t, level ascending
  std::vector<std::uint64_t> executions;   // nodes closing at t, level ascending
};
std::vector<ScheduleEntry> schedule(const TreePlan& plan);

// JSON object with the plan parameters and the full node list.
std::string plan_to_json(const TreePlan& plan);

}  // namespace csdp

#endif  // CSDP_TREE_PLAN_HPP
