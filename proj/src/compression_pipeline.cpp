#include "fedcvlc/compression_pipeline.hpp"

#include <string>

#include "fedcvlc/error.hpp"
#include "fedcvlc/rng.hpp"
#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc {

CompressionConfig CompressionConfig::variable_length(QuantizerKind kind,
                                                     const BudgetConfig& budget) {
  CompressionConfig cfg;
  cfg.kind = kind;
  cfg.budget = budget;
  return cfg;
}

CompressionConfig CompressionConfig::fixed_length(int bits, QuantizerKind kind,
                                                  const BudgetConfig& budget) {
  CompressionConfig cfg = variable_length(kind, budget);
  cfg.policy = CodeLengthPolicy::kFixed;
  cfg.fixed_bits = bits;
  return cfg;
}

std::size_t CompressedRound::packet_bytes() const {
  std::size_t total = 0;
  for (const PacketBytes& p : packets) total += p.size();
  return total;
}

std::size_t CompressedRound::uplink_bytes(const CompressionConfig& cfg) const {
  const bool scaled = cfg.policy == CodeLengthPolicy::kOptimized && !packets.empty();
  return packet_bytes() + (scaled ? kScaleMetadataBytes : 0);
}

std::vector<PacketBytes> encode_plan(const UpdateVector& u, const RankedUpdates& ranked,
                                     const PartitionPlan& plan, const CompressionConfig& cfg,
                                     std::uint64_t seed) {
  if (ranked.order.size() != u.dimension()) {
    throw Error(ErrorCode::kInvalidInput, "ranking does not match the update dimension");
  }
  if (plan.k > static_cast<std::int64_t>(u.dimension())) {
    throw Error(ErrorCode::kInvalidInput, "plan keeps more updates than the vector has");
  }
  std::vector<PacketBytes> packets;
  const std::span<const double> values = u.values();
  std::vector<double> block;
  std::vector<PacketEntry> entries;
  std::size_t rank = 0;
  for (std::size_t r = 0; r < plan.parts.size(); ++r) {
    const auto count = static_cast<std::size_t>(plan.parts[r]);
    const int bits = plan.code_bits[r];
    block.resize(count);
    for (std::size_t i = 0; i < count; ++i) block[i] = values[ranked.order[rank + i]];
    const QuantizedBlock q = quantize(cfg.kind, block, bits, derive_key(seed, r));
    entries.resize(count);
    for (std::size_t i = 0; i < count; ++i) entries[i] = {ranked.order[rank + i], q.cids[i]};
    packets.push_back(encode_packet(entries, bits, cfg.budget.position_bits, cfg.kind,
                                      q.meta, cfg.budget.packet_bits));
    rank += count;
  }
  return packets;
}

CompressedRound compress(const UpdateVector& u, const CompressionConfig& cfg,
                         const ScaleState& scale, std::uint64_t seed) {
  if (static_cast<std::int64_t>(u.dimension()) != cfg.budget.dimension) {
    throw Error(ErrorCode::kInvalidInput, "update dimension " + std::to_string(u.dimension()) +
                                              " does not match budget d=" +
                                              std::to_string(cfg.budget.dimension));
  }
  cfg.budget.validate();

  CompressedRound round;
  const RankedUpdates ranked = rank_by_magnitude(u);
  if (cfg.policy == CodeLengthPolicy::kOptimized) {
    round.fit = fit_power_law(ranked, u);
    OptimizerOptions options;
    options.k_stride = cfg.k_stride;
    round.plan = optimize_plan(*round.fit, cfg.budget, scale, cfg.kind, options);
  } else {
    // Baselines do not need the fit to compress; it only feeds the reported bound.
    PowerLawFit fit;
    try {
      fit = fit_power_law(ranked, u);
      round.fit = fit;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateDistribution) throw;
    }
    round.plan = fixed_length_plan(cfg.fixed_bits, cfg.budget, fit, scale, cfg.kind);
    if (!round.fit) round.plan.gamma = std::numeric_limits<double>::quiet_NaN();
  }

  round.packets = encode_plan(u, ranked, round.plan, cfg, seed);
  return round;
}

UpdateVector decompress(std::span<const PacketBytes> packets, std::size_t dimension,
                        double scale_b) {
  if (dimension == 0) throw Error(ErrorCode::kInvalidInput, "dimension must be >= 1");
  if (!(scale_b > 0.0)) throw Error(ErrorCode::kInvalidInput, "scale must be positive");
  std::vector<double> dense(dimension, 0.0);
  std::vector<bool> seen(dimension, false);
  for (const PacketBytes& bytes : packets) {
    const DecodedPacket packet = decode_packet(bytes);
    for (const PacketEntry& e : packet.entries) {
      if (e.pid >= dimension) {
        throw Error(ErrorCode::kCorruptPacket, "pid " + std::to_string(e.pid) + " >= d");
      }
      if (seen[e.pid]) {
        throw Error(ErrorCode::kCorruptPacket, "duplicate pid " + std::to_string(e.pid));
      }
      seen[e.pid] = true;
      dense[e.pid] = centroid_value(packet.kind, packet.meta, packet.code_bits, e.cid) / scale_b;
    }
  }
  return UpdateVector(std::move(dense));
}

double measured_error(const UpdateVector& u, const UpdateVector& u_hat) {
  if (u.dimension() != u_hat.dimension()) {
    throw Error(ErrorCode::kInvalidInput, "dimension mismatch in measured_error");
  }
  const double norm_sq = simd::sum_squares(u.values());
  const double err = simd::squared_distance(u.values(), u_hat.values());
  if (norm_sq == 0.0) {
    if (err != 0.0) throw Error(ErrorCode::kInvalidInput, "relative error undefined for u = 0");
    return 0.0;
  }
  return err / norm_sq;
}

UpdateVector ErrorFeedback::corrected(const UpdateVector& u) const {
  if (u.dimension() != residual_.size()) {
    throw Error(ErrorCode::kInvalidInput, "dimension mismatch in error feedback");
  }
  std::vector<double> out(u.values().begin(), u.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += residual_[i];
  return UpdateVector(std::move(out));
}

void ErrorFeedback::record(const UpdateVector& corrected, const UpdateVector& received) {
  if (corrected.dimension() != residual_.size() || received.dimension() != residual_.size()) {
    throw Error(ErrorCode::kInvalidInput, "dimension mismatch in error feedback");
  }
  for (std::size_t i = 0; i < residual_.size(); ++i) residual_[i] = corrected[i] - received[i];
}

}  // namespace fedcvlc
