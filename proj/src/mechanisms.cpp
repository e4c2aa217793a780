#include "csdp/mechanisms.hpp"

#include <cmath>
#include <cstring>

#include "csdp/errors.hpp"

namespace csdp {

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kBinaryBlanket: return "binary-blanket";
    case MechanismKind::kVectorFixedPoint: return "vector-fixedpoint";
    case MechanismKind::kOracle: return "oracle";
  }
  throw InvalidArgument("unknown mechanism kind");
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  if (name == "binary-blanket") return MechanismKind::kBinaryBlanket;
  if (name == "vector-fixedpoint") return MechanismKind::kVectorFixedPoint;
  if (name == "oracle") return MechanismKind::kOracle;
  throw InvalidArgument("unknown mechanism kind: " + name);
}

double blanket_rate(std::int64_t m, const PrivacyParams& budget) {
  if (m < 1) throw InvalidArgument("blanket_rate: m must be >= 1");
  validate_budget(budget);
  double raw = 32.0 * std::log(2.0 / budget.delta) /
               (budget.epsilon * budget.epsilon * static_cast<double>(m));
  return std::min(1.0, raw);
}

std::uint32_t encode_binary_bit(int bit, double gamma, StreamRng& rng) {
  if (bit != 0 && bit != 1) throw InvalidArgument("encode_binary_bit: bit must be 0 or 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidArgument("encode_binary_bit: gamma must be in [0, 1]");
  }
  // Two draws unconditionally so the stream position never depends on values.
  bool blanket = rng.bernoulli(gamma);
  bool coin = rng.bernoulli(0.5);
  return blanket ? static_cast<std::uint32_t>(coin) : static_cast<std::uint32_t>(bit);
}

namespace {

double binary_noise_variance(std::int64_t m, double gamma) {
  double one_minus = 1.0 - gamma;
  return static_cast<double>(m) * gamma * (2.0 - gamma) / (4.0 * one_minus * one_minus);
}

// Stochastic rounding of v in [0,1] to the integer grid {0..q}; unbiased.
std::uint32_t round_to_grid(double v, StreamRng& rng) {
  double scaled = v * static_cast<double>(kQuantLevels);
  double lo = std::floor(scaled);
  double frac = scaled - lo;
  // One draw unconditionally, value-independent consumption.
  bool up = rng.uniform() < frac;
  double z = lo + (up ? 1.0 : 0.0);
  if (z < 0.0) z = 0.0;
  if (z > static_cast<double>(kQuantLevels)) z = static_cast<double>(kQuantLevels);
  return static_cast<std::uint32_t>(z);
}

}  // namespace

SumEstimate decode_binary_sum(std::span<const Message> messages,
                              std::int64_t m, double gamma) {
  if (gamma >= 1.0) {
    throw EstimatorUndefined("decode_binary_sum: gamma = 1 leaves no signal");
  }
  if (static_cast<std::int64_t>(messages.size()) != m) {
    throw MalformedTranscript("decode_binary_sum: message count != m");
  }
  // Integer accumulation first: the decoded value must not depend on the
  // multiset order, bit for bit.
  std::int64_t sum = 0;
  for (const Message& msg : messages) {
    if (msg.coord != 0 || msg.value > 1) {
      throw MalformedTranscript("decode_binary_sum: not a bit message");
    }
    sum += msg.value;
  }
  SumEstimate est;
  est.value.push_back((static_cast<double>(sum) - gamma * static_cast<double>(m) / 2.0) /
                      (1.0 - gamma));
  est.variance_bound = binary_noise_variance(m, gamma);
  return est;
}

void encode_vector(std::span<const double> x, double gamma, StreamRng& rng,
                   std::vector<Message>* out) {
  double norm_sq = 0.0;
  for (double v : x) norm_sq += v * v;
  if (norm_sq > 1.0 + 1e-9) {
    throw InvalidArgument("encode_vector: ||x||_2 must be <= 1");
  }
  for (std::size_t c = 0; c < x.size(); ++c) {
    double shifted = (x[c] + 1.0) / 2.0;  // [-1,1] -> [0,1]
    std::uint32_t z = round_to_grid(shifted, rng);
    bool blanket = rng.bernoulli(gamma);
    std::uint32_t u = static_cast<std::uint32_t>(rng.uniform_int(kQuantLevels + 1));
    out->push_back(Message{static_cast<std::uint32_t>(c), blanket ? u : z});
  }
}

SumEstimate decode_vector_sum(std::span<const Message> messages,
                              std::int64_t m, int dimension, double gamma) {
  if (gamma >= 1.0) {
    throw EstimatorUndefined("decode_vector_sum: gamma = 1 leaves no signal");
  }
  if (dimension < 1) throw InvalidArgument("decode_vector_sum: dimension must be >= 1");
  if (static_cast<std::int64_t>(messages.size()) != m * dimension) {
    throw MalformedTranscript("decode_vector_sum: message count != m * dimension");
  }
  std::vector<std::int64_t> sums(static_cast<std::size_t>(dimension), 0);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(dimension), 0);
  for (const Message& msg : messages) {
    if (msg.coord >= static_cast<std::uint32_t>(dimension) || msg.value > kQuantLevels) {
      throw MalformedTranscript("decode_vector_sum: bad coordinate or payload");
    }
    sums[msg.coord] += msg.value;
    ++counts[msg.coord];
  }
  for (std::int64_t c : counts) {
    if (c != m) throw MalformedTranscript("decode_vector_sum: uneven coordinate counts");
  }
  const double q = static_cast<double>(kQuantLevels);
  SumEstimate est;
  for (int c = 0; c < dimension; ++c) {
    // Debias the blanket on the integer grid (uniform blanket mean is q/2),
    // de-quantize to shifted units, then undo the [-1,1] -> [0,1] shift.
    double grid_sum = (static_cast<double>(sums[static_cast<std::size_t>(c)]) -
                       gamma * static_cast<double>(m) * q / 2.0) /
                      (1.0 - gamma);
    double shifted_sum = grid_sum / q;
    est.value.push_back(2.0 * shifted_sum - static_cast<double>(m));
  }
  // Mixture variance on the [0,1] grid: gamma * Var(uniform) +
  // gamma*(1-gamma) * (v - 1/2)^2 <= gamma/12*(1+2/q) + gamma*(1-gamma)/4 per
  // message, plus rounding variance <= 1/(4q^2) per user; debias divides by
  // (1-gamma)^2 and the de-shift doubles values, so variance scales by 4.
  double var_uniform = (1.0 + 2.0 / q) / 12.0;
  double one_minus = 1.0 - gamma;
  double per_message = gamma * var_uniform + gamma * one_minus / 4.0;
  est.variance_bound = 4.0 * static_cast<double>(m) * per_message / (one_minus * one_minus) +
                       static_cast<double>(m) / (q * q);
  return est;
}

SumEstimate oracle_sum(std::span<const double> true_sums, double variance,
                       StreamRng& rng) {
  if (!(variance >= 0.0)) throw InvalidArgument("oracle_sum: variance must be >= 0");
  double sd = std::sqrt(variance);
  SumEstimate est;
  est.value.reserve(true_sums.size());
  for (double s : true_sums) {
    double noise = rng.normal(0.0, sd);
    est.value.push_back(s + noise);
  }
  est.variance_bound = variance;
  return est;
}

double spec_blanket_rate(const MechanismSpec& spec) {
  switch (spec.kind) {
    case MechanismKind::kBinaryBlanket:
      return blanket_rate(spec.batch_size, spec.budget);
    case MechanismKind::kVectorFixedPoint:
      return blanket_rate(spec.batch_size, split_budget(spec.budget, spec.dimension));
    case MechanismKind::kOracle:
      return 0.0;
  }
  throw InvalidArgument("unknown mechanism kind");
}

double mechanism_variance(const MechanismSpec& spec) {
  if (spec.batch_size < 1) throw InvalidArgument("mechanism_variance: batch_size must be >= 1");
  switch (spec.kind) {
    case MechanismKind::kOracle:
      return spec.oracle_variance;
    case MechanismKind::kBinaryBlanket: {
      double gamma = spec_blanket_rate(spec);
      if (gamma >= 1.0) {
        throw EstimatorUndefined("mechanism_variance: blanket rate saturates at 1");
      }
      return binary_noise_variance(spec.batch_size, gamma);
    }
    case MechanismKind::kVectorFixedPoint: {
      double gamma = spec_blanket_rate(spec);
      if (gamma >= 1.0) {
        throw EstimatorUndefined("mechanism_variance: blanket rate saturates at 1");
      }
      const double q = static_cast<double>(kQuantLevels);
      double var_uniform = (1.0 + 2.0 / q) / 12.0;
      double one_minus = 1.0 - gamma;
      double per_message = gamma * var_uniform + gamma * one_minus / 4.0;
      return 4.0 * static_cast<double>(spec.batch_size) * per_message /
                 (one_minus * one_minus) +
             static_cast<double>(spec.batch_size) / (q * q);
    }
  }
  throw InvalidArgument("unknown mechanism kind");
}

MechanismInstance::MechanismInstance(std::uint64_t mechanism_id,
                                     const MechanismSpec& spec,
                                     std::uint64_t master_seed)
    : mechanism_id_(mechanism_id),
      spec_(spec),
      gamma_(spec_blanket_rate(spec)),
      rng_(StreamRng::derive(master_seed, mechanism_id)),
      oracle_acc_(static_cast<std::size_t>(spec.dimension), 0.0) {
  if (spec.batch_size < 1) throw InvalidArgument("mechanism: batch_size must be >= 1");
  if (spec.dimension < 1) throw InvalidArgument("mechanism: dimension must be >= 1");
  if (spec.kind == MechanismKind::kBinaryBlanket && spec.dimension != 1) {
    throw InvalidArgument("mechanism: binary-blanket sums scalars (dimension 1)");
  }
  if (spec.kind != MechanismKind::kOracle) validate_budget(spec.budget);
}

void MechanismInstance::encode_user(std::span<const double> value,
                                    std::vector<Message>* out) {
  if (static_cast<int>(value.size()) != spec_.dimension) {
    throw InvalidArgument("encode_user: value dimension mismatch");
  }
  if (users_encoded_ >= spec_.batch_size) {
    throw ProtocolViolation("encode_user: batch already full");
  }
  ++users_encoded_;
  switch (spec_.kind) {
    case MechanismKind::kBinaryBlanket: {
      double v = value[0];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidArgument("encode_user: binary input must lie in [0, 1]");
      }
      // Real values are stochastically rounded to a bit first; exact 0/1 pass
      // through (the draw is still consumed to keep the stream aligned).
      bool up = rng_.uniform() < v;
      out->push_back(Message{0, encode_binary_bit(up ? 1 : 0, gamma_, rng_)});
      return;
    }
    case MechanismKind::kVectorFixedPoint:
      encode_vector(value, gamma_, rng_, out);
      return;
    case MechanismKind::kOracle:
      for (std::size_t c = 0; c < oracle_acc_.size(); ++c) oracle_acc_[c] += value[c];
      return;
  }
  throw InvalidArgument("unknown mechanism kind");
}

SumEstimate MechanismInstance::decode(std::span<const Message> shuffled) const {
  switch (spec_.kind) {
    case MechanismKind::kBinaryBlanket:
      return decode_binary_sum(shuffled, spec_.batch_size, gamma_);
    case MechanismKind::kVectorFixedPoint:
      return decode_vector_sum(shuffled, spec_.batch_size, spec_.dimension, gamma_);
    case MechanismKind::kOracle: {
      // The oracle models the mechanism contract directly: exact sum plus
      // input-independent Gaussian noise. Messages are never materialized.
      StreamRng noise_rng = rng_;  // decode must not mutate encoder state
      return oracle_sum(oracle_acc_, spec_.oracle_variance, noise_rng);
    }
  }
  throw InvalidArgument("unknown mechanism kind");
}

}  // namespace csdp
