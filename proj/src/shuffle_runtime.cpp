#include "csdp/shuffle_runtime.hpp"

#include <cmath>
#include <ostream>
#include <istream>
#include <utility>

#include "json.hpp"

#include "csdp/errors.hpp"

namespace csdp {

void shuffle_messages(std::vector<Message>* messages, StreamRng& rng) {
  std::vector<Message>& m = *messages;
  for (std::size_t i = m.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(m[i - 1], m[j]);
  }
}

MechanismSpec MechanismPolicy::spec_for(std::int64_t batch_size,
                                        const PrivacyParams& per_mechanism) const {
  MechanismSpec spec;
  spec.kind = kind;
  spec.batch_size = batch_size;
  spec.budget = per_mechanism;
  spec.dimension = dimension;
  if (kind == MechanismKind::kOracle) {
    if (oracle_fixed_variance >= 0.0) {
      spec.oracle_variance = oracle_fixed_variance;
    } else {
      spec.oracle_variance = oracle_constant * std::log(1.0 / per_mechanism.delta) /
                             (per_mechanism.epsilon * per_mechanism.epsilon);
    }
  }
  return spec;
}

SumEstimate decode_record(const TranscriptRecord& record) {
  switch (record.kind) {
    case MechanismKind::kBinaryBlanket:
      return decode_binary_sum(record.messages, record.batch_size, record.gamma);
    case MechanismKind::kVectorFixedPoint:
      return decode_vector_sum(record.messages, record.batch_size,
                               record.dimension, record.gamma);
    case MechanismKind::kOracle:
      throw MalformedTranscript("decode_record: oracle records carry no messages");
  }
  throw InvalidArgument("unknown mechanism kind");
}

void write_transcript_jsonl(std::span<const TranscriptRecord> records,
                            std::ostream& out) {
  for (const TranscriptRecord& rec : records) {
    nlohmann::json line;
    line["close_time"] = rec.close_time;
    line["slot_id"] = rec.slot_id;
    line["mechanism_id"] = rec.mechanism_id;
    line["kind"] = to_string(rec.kind);
    line["m"] = rec.batch_size;
    line["d"] = rec.dimension;
    line["gamma"] = rec.gamma;
    std::vector<std::uint64_t> packed;
    packed.reserve(rec.messages.size());
    for (const Message& msg : rec.messages) packed.push_back(msg.packed());
    line["messages"] = packed;
    out << line.dump() << '\n';
  }
}

std::vector<TranscriptRecord> read_transcript_jsonl(std::istream& in) {
  std::vector<TranscriptRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw MalformedTranscript(std::string("transcript line is not JSON: ") + err.what());
    }
    try {
      TranscriptRecord rec;
      rec.close_time = parsed.at("close_time").get<std::int64_t>();
      rec.slot_id = parsed.at("slot_id").get<int>();
      rec.mechanism_id = parsed.at("mechanism_id").get<std::uint64_t>();
      rec.kind = mechanism_kind_from_string(parsed.at("kind").get<std::string>());
      rec.batch_size = parsed.at("m").get<std::int64_t>();
      rec.dimension = parsed.at("d").get<int>();
      rec.gamma = parsed.at("gamma").get<double>();
      for (std::uint64_t raw : parsed.at("messages")) {
        rec.messages.push_back(Message::unpack(raw));
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& err) {
      throw MalformedTranscript(std::string("transcript record field: ") + err.what());
    }
  }
  return records;
}

std::uint64_t ShufflerSlot::mechanism_id() const {
  if (!mech_) throw ProtocolViolation("mechanism_id: slot is inactive");
  return mech_->mechanism_id();
}

void ShufflerSlot::activate(std::uint64_t mechanism_id, const MechanismSpec& spec,
                            std::uint64_t master_seed) {
  if (mech_) {
    throw ProtocolViolation("activate: slot " + std::to_string(slot_id_) +
                            " is already active");
  }
  mech_.emplace(mechanism_id, spec, master_seed);
  buffer_.clear();
  remaining_ = spec.batch_size;
}

void ShufflerSlot::submit(std::span<const double> value) {
  if (!mech_) {
    throw ProtocolViolation("submit: slot " + std::to_string(slot_id_) +
                            " is inactive");
  }
  if (remaining_ <= 0) {
    throw ProtocolViolation("submit: slot " + std::to_string(slot_id_) +
                            " batch is already full");
  }
  mech_->encode_user(value, &buffer_);
  --remaining_;
}

std::optional<ShufflerSlot::Execution> ShufflerSlot::execute_if_full() {
  if (!mech_ || remaining_ > 0) return std::nullopt;
  Execution exec;
  exec.mechanism_id = mech_->mechanism_id();
  exec.kind = mech_->spec().kind;
  exec.batch_size = mech_->spec().batch_size;
  exec.dimension = mech_->spec().dimension;
  exec.gamma = mech_->gamma();
  exec.messages = std::move(buffer_);
  shuffle_messages(&exec.messages, mech_->rng());
  exec.estimate = mech_->decode(exec.messages);
  mech_.reset();
  buffer_.clear();
  remaining_ = 0;
  return exec;
}

ShuffleRuntime::ShuffleRuntime(const TreePlan& plan, const MechanismPolicy& policy,
                               const PrivacyParams& total_budget,
                               std::uint64_t master_seed)
    : plan_(&plan),
      policy_(policy),
      per_mechanism_(split_budget(total_budget, plan.requested_levels)),
      master_seed_(master_seed) {
  if (policy.dimension < 1) {
    throw InvalidArgument("runtime: policy dimension must be >= 1");
  }
  slots_.reserve(plan.levels);
  for (int level = 1; level <= plan.levels; ++level) slots_.emplace_back(level);
  level_cursor_.assign(static_cast<std::size_t>(plan.levels), 0);
}

std::vector<ClosedBatch> ShuffleRuntime::step(std::span<const double> value) {
  if (t_ >= plan_->padded_horizon) {
    throw ProtocolViolation("step: past the padded horizon");
  }
  ++t_;
  if (static_cast<int>(value.size()) != policy_.dimension) {
    throw InvalidArgument("step: value dimension mismatch");
  }

  for (int level = 1; level <= plan_->levels; ++level) {
    const std::vector<std::uint64_t>& order = plan_->level_index[level];
    std::size_t& cursor = level_cursor_[level - 1];
    if (cursor >= order.size()) continue;
    const PlanNode& node = plan_->node(order[cursor]);
    if (node.open_time() != t_) continue;
    if (level > static_cast<int>(slots_.size())) {
      throw CapacityExceeded("step: node level exceeds shuffler count");
    }
    slots_[level - 1].activate(node.node_id,
                               policy_.spec_for(node.size(), per_mechanism_),
                               master_seed_);
    ++cursor;
  }

  for (ShufflerSlot& slot : slots_) {
    if (!slot.active()) continue;
    const PlanNode& node = plan_->node(slot.mechanism_id());
    if (node.first <= t_ && t_ <= node.last) slot.submit(value);
  }

  std::vector<ClosedBatch> closed;
  for (ShufflerSlot& slot : slots_) {
    std::optional<ShufflerSlot::Execution> exec = slot.execute_if_full();
    if (!exec) continue;
    TranscriptRecord rec;
    rec.close_time = t_;
    rec.slot_id = slot.slot_id();
    rec.mechanism_id = exec->mechanism_id;
    rec.kind = exec->kind;
    rec.batch_size = exec->batch_size;
    rec.dimension = exec->dimension;
    rec.gamma = exec->gamma;
    rec.messages = std::move(exec->messages);
    transcript_.push_back(std::move(rec));
    closed.push_back(ClosedBatch{exec->mechanism_id, std::move(exec->estimate)});
  }
  return closed;
}

std::vector<ClosedBatch> ShuffleRuntime::step(double value) {
  return step(std::span<const double>(&value, 1));
}

std::size_t ShuffleRuntime::active_count() const {
  std::size_t n = 0;
  for (const ShufflerSlot& slot : slots_) n += slot.active() ? 1 : 0;
  return n;
}

}  // namespace csdp
