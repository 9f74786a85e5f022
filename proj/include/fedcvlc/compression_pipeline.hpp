#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fedcvlc/codelen_optimizer.hpp"
#include "fedcvlc/packet_codec.hpp"
#include "fedcvlc/quantizer.hpp"
#include "fedcvlc/update_model.hpp"

namespace fedcvlc {

// B travels beside the packets as one binary64 per client per round.
inline constexpr std::size_t kScaleMetadataBytes = 8;

enum class CodeLengthPolicy {
  kOptimized,  // variable code lengths from optimize_plan, scaled by B
  kFixed,      // one code length for every packet, no scaling
};

struct CompressionConfig {
  QuantizerKind kind = QuantizerKind::kPq;
  BudgetConfig budget;
  std::int64_t k_stride = 1;
  bool error_feedback = false;
  CodeLengthPolicy policy = CodeLengthPolicy::kOptimized;
  int fixed_bits = 32;  // used by kFixed; 32 is plain top-k

  static CompressionConfig variable_length(QuantizerKind kind, const BudgetConfig& budget);
  static CompressionConfig fixed_length(int bits, QuantizerKind kind, const BudgetConfig& budget);
};

struct CompressedRound {
  std::vector<PacketBytes> packets;
  PartitionPlan plan;
  std::optional<PowerLawFit> fit;
  double measured_rel_error = std::numeric_limits<double>::quiet_NaN();

  std::size_t packet_bytes() const;
  // Packets plus the out-of-band scale for the variable-length policy.
  std::size_t uplink_bytes(const CompressionConfig& cfg) const;
};

// Sparsify to the plan's top-k, quantize packet r at y_r bits with stream
// derive_key(seed, r), and encode. The receiver divides by plan.scale.
CompressedRound compress(const UpdateVector& u, const CompressionConfig& cfg,
                         const ScaleState& scale, std::uint64_t seed);

// The packet-building half of compress() for a plan computed elsewhere.
std::vector<PacketBytes> encode_plan(const UpdateVector& u, const RankedUpdates& ranked,
                                     const PartitionPlan& plan, const CompressionConfig& cfg,
                                     std::uint64_t seed);

// Dense reconstruction: dequantized value / scale_b at each transmitted pid,
// zero elsewhere. Duplicate or out-of-range pids are CorruptPacket.
UpdateVector decompress(std::span<const PacketBytes> packets, std::size_t dimension,
                        double scale_b);

// ||u - u_hat||^2 / ||u||^2; 0 when both are zero.
double measured_error(const UpdateVector& u, const UpdateVector& u_hat);

// Residual accumulation across rounds: the client compresses u + residual and
// keeps whatever the receiver did not get.
class ErrorFeedback {
 public:
  explicit ErrorFeedback(std::size_t dimension) : residual_(dimension, 0.0) {}

  UpdateVector corrected(const UpdateVector& u) const;
  void record(const UpdateVector& corrected, const UpdateVector& received);

  std::span<const double> residual() const noexcept { return residual_; }

 private:
  std::vector<double> residual_;
};

}  // namespace fedcvlc
