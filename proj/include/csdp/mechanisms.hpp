#ifndef CSDP_MECHANISMS_HPP
#define CSDP_MECHANISMS_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csdp/privacy.hpp"
#include "csdp/rng.hpp"

namespace csdp {

enum class MechanismKind {
  kBinaryBlanket,     // one bit per user, blanket randomization
  kVectorFixedPoint,  // fixed-point coordinates, per-coordinate blanket
  kOracle,            // no messages; exact sum plus Gaussian noise
};

std::string to_string(MechanismKind kind);
MechanismKind mechanism_kind_from_string(const std::string& name);

// Everything a batch mechanism needs to run. `dimension` is the number of
// summed entries (1 for scalar streams). For the oracle kind,
// `oracle_variance` is the per-entry noise variance.
struct MechanismSpec {
  MechanismKind kind = MechanismKind::kBinaryBlanket;
  std::int64_t batch_size = 0;  // m: users in this batch
  PrivacyParams budget;         // this mechanism's own budget
  int dimension = 1;
  double oracle_variance = 0.0;
};

// One shuffled message: a coordinate tag and a fixed-point payload.
// Binary-blanket messages use coord 0 and value in {0, 1}.
struct Message {
  std::uint32_t coord = 0;
  std::uint32_t value = 0;

  bool operator==(const Message&) const = default;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(coord) << 32) | value;
  }
  static Message unpack(std::uint64_t raw) {
    return Message{static_cast<std::uint32_t>(raw >> 32),
                   static_cast<std::uint32_t>(raw & 0xFFFFFFFFull)};
  }
};

// A decoded batch sum: one value per entry plus the a-priori variance bound
// of the additive noise (identical for every entry).
struct SumEstimate {
  std::vector<double> value;
  double variance_bound = 0.0;
};

// Fixed-point grid for vector payloads.
inline constexpr std::uint32_t kQuantLevels = 1u << 16;

// Blanket randomization rate gamma = min(1, 32 * ln(2/delta) / (eps^2 * m)).
double blanket_rate(std::int64_t m, const PrivacyParams& budget);

// With probability gamma emits an independent fair coin, otherwise the bit.
std::uint32_t encode_binary_bit(int bit, double gamma, StreamRng& rng);

// Debiased sum of m blanket-encoded bits:
//   (sum - gamma*m/2) / (1 - gamma).
// Unbiased; noise variance is exactly m*gamma*(2-gamma)/(4*(1-gamma)^2) for
// bit-valued inputs. Throws EstimatorUndefined when gamma = 1.
SumEstimate decode_binary_sum(std::span<const Message> messages,
                              std::int64_t m, double gamma);

// Encodes one user's vector x (||x||_2 <= 1): each coordinate is shifted to
// [0,1], stochastically rounded to the kQuantLevels grid, and passed through
// the blanket with the per-coordinate rate. Emits one tagged message per
// coordinate.
void encode_vector(std::span<const double> x, double gamma, StreamRng& rng,
                   std::vector<Message>* out);

// Per-coordinate debias as decode_binary_sum (on the fixed-point grid), then
// de-quantize and de-shift (2*s - m) back to [-1,1]-coordinate sums.
SumEstimate decode_vector_sum(std::span<const Message> messages,
                              std::int64_t m, int dimension, double gamma);

// True sums plus independent N(0, variance) noise per entry. The noise draw
// never depends on the input values.
SumEstimate oracle_sum(std::span<const double> true_sums, double variance,
                       StreamRng& rng);

// A-priori per-entry variance bound of the decoded batch sum for a spec.
// Binary: m*gamma*(2-gamma)/(4*(1-gamma)^2). Vector: blanket mixture variance
// on the fixed-point grid plus the m/(4q^2) quantization term, both scaled by
// the de-shift factor 4. Oracle: the configured variance.
double mechanism_variance(const MechanismSpec& spec);

// The blanket rate a spec implies: per-coordinate budget split for vectors,
// 0 for the oracle kind.
double spec_blanket_rate(const MechanismSpec& spec);

// Stateful per-batch instance used by the shuffle runtime. Owns its RNG
// stream (derived from master seed and mechanism id) so concurrent batches
// never interleave draws.
class MechanismInstance {
 public:
  MechanismInstance(std::uint64_t mechanism_id, const MechanismSpec& spec,
                    std::uint64_t master_seed);

  // Appends this user's messages (none for the oracle kind, which accumulates
  // the exact sum internally).
  void encode_user(std::span<const double> value, std::vector<Message>* out);

  // Decodes a full batch from the shuffled multiset (oracle: from its own
  // accumulator).
  SumEstimate decode(std::span<const Message> shuffled) const;

  std::uint64_t mechanism_id() const { return mechanism_id_; }
  const MechanismSpec& spec() const { return spec_; }
  double gamma() const { return gamma_; }
  StreamRng& rng() { return rng_; }

 private:
  std::uint64_t mechanism_id_;
  MechanismSpec spec_;
  double gamma_;
  StreamRng rng_;
  std::vector<double> oracle_acc_;
  std::int64_t users_encoded_ = 0;
};

}  // namespace csdp

#endif  // CSDP_MECHANISMS_HPP
