#ifndef CSDP_SHUFFLE_RUNTIME_HPP
#define CSDP_SHUFFLE_RUNTIME_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdp/mechanisms.hpp"
#include "csdp/privacy.hpp"
#include "csdp/rng.hpp"
#include "csdp/tree_plan.hpp"

namespace csdp {

// Uniform Fisher-Yates permutation of the flattened message list in place.
void shuffle_messages(std::vector<Message>* messages, StreamRng& rng);

// How the runtime instantiates a mechanism for each tree node. The batch size
// comes from the node, the budget from split_budget(total, k); everything
// else is policy.
struct MechanismPolicy {
  MechanismKind kind = MechanismKind::kBinaryBlanket;
  int dimension = 1;
  // Oracle noise variance per entry: oracle_fixed_variance >= 0 uses that
  // value directly (0 gives the zero-noise mode); otherwise
  // oracle_constant * ln(1/delta_mech) / eps_mech^2.
  double oracle_constant = 1.0;
  double oracle_fixed_variance = -1.0;

  MechanismSpec spec_for(std::int64_t batch_size,
                         const PrivacyParams& per_mechanism) const;
};

// What the server keeps from one executed batch: the record that would cross
// the wire. Records are appended in close_time order, ties in slot_id order.
struct TranscriptRecord {
  std::int64_t close_time = 0;
  int slot_id = 0;
  std::uint64_t mechanism_id = 0;
  MechanismKind kind = MechanismKind::kBinaryBlanket;
  std::int64_t batch_size = 0;
  int dimension = 1;
  double gamma = 0.0;
  std::vector<Message> messages;  // shuffled; empty for the oracle kind
};

// Re-runs the server-side decode purely from a serialized record. Oracle
// records carry no messages and cannot be re-decoded.
SumEstimate decode_record(const TranscriptRecord& record);

// One line of line-delimited JSON per record; messages are packed
// (coord << 32 | value) integers.
void write_transcript_jsonl(std::span<const TranscriptRecord> records,
                            std::ostream& out);
std::vector<TranscriptRecord> read_transcript_jsonl(std::istream& in);

// A batch the runtime just closed, handed to the server logic. The estimate
// is what decode_record would produce (the oracle kind has no record decode,
// its estimate is exact sum plus configured noise).
struct ClosedBatch {
  std::uint64_t mechanism_id = 0;
  SumEstimate estimate;
};

// One shuffler: Inactive, or Active with a mechanism instance and a buffer of
// the users' encoded messages received so far.
class ShufflerSlot {
 public:
  explicit ShufflerSlot(int slot_id) : slot_id_(slot_id) {}

  int slot_id() const { return slot_id_; }
  bool active() const { return mech_.has_value(); }
  std::int64_t remaining() const { return remaining_; }
  std::uint64_t mechanism_id() const;

  // Inactive -> Active with an empty buffer and remaining = batch_size.
  void activate(std::uint64_t mechanism_id, const MechanismSpec& spec,
                std::uint64_t master_seed);

  // Encodes one user's raw value through the active mechanism and buffers the
  // resulting messages.
  void submit(std::span<const double> value);

  // When the batch is full: shuffles the buffer with the mechanism's own
  // stream, decodes, and deactivates. Otherwise returns nothing.
  struct Execution {
    std::uint64_t mechanism_id;
    MechanismKind kind;
    std::int64_t batch_size;
    int dimension;
    double gamma;
    std::vector<Message> messages;
    SumEstimate estimate;
  };
  std::optional<Execution> execute_if_full();

 private:
  int slot_id_;
  std::optional<MechanismInstance> mech_;
  std::vector<Message> buffer_;
  std::int64_t remaining_ = 0;
};

// The k-shuffler protocol loop. Each step performs, in order: activations of
// nodes opening at t, submission of the t'th user's encoded value to every
// active slot whose leaf range contains t (derived from the plan, not caller
// input), then execution of slots that became full, reported in slot order.
//
// The plan must outlive the runtime. One runtime is a single-owner state
// machine; independent runtimes never share state.
class ShuffleRuntime {
 public:
  ShuffleRuntime(const TreePlan& plan, const MechanismPolicy& policy,
                 const PrivacyParams& total_budget, std::uint64_t master_seed);

  // Feeds the next user's value (policy.dimension entries). Must be called
  // exactly padded_horizon times; binary-mode callers submit zeros for the
  // phantom tail. Returns the batches closed at this time.
  std::vector<ClosedBatch> step(std::span<const double> value);
  std::vector<ClosedBatch> step(double value);

  std::int64_t time() const { return t_; }
  const TreePlan& plan() const { return *plan_; }
  const PrivacyParams& per_mechanism_budget() const { return per_mechanism_; }
  const MechanismPolicy& policy() const { return policy_; }
  const std::vector<TranscriptRecord>& transcript() const { return transcript_; }
  std::size_t active_count() const;
  bool all_inactive() const { return active_count() == 0; }

 private:
  const TreePlan* plan_;
  MechanismPolicy policy_;
  PrivacyParams per_mechanism_;
  std::uint64_t master_seed_;
  std::vector<ShufflerSlot> slots_;        // index i holds slot/level i+1
  std::vector<std::size_t> level_cursor_;  // next unopened node per level
  std::vector<TranscriptRecord> transcript_;
  std::int64_t t_ = 0;
};

}  // namespace csdp

#endif  // CSDP_SHUFFLE_RUNTIME_HPP
