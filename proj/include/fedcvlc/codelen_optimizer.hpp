#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedcvlc/quantizer.hpp"
#include "fedcvlc/update_model.hpp"

namespace fedcvlc {

// Application header size of every packet (see packet_codec.hpp).
inline constexpr std::int64_t kHeaderBits = 128;

// ceil(log2 d), at least 1.
int position_bits_for(std::int64_t dimension);

// Per-client uplink budget for one round: R packets of b bits, H header bits
// each, s bits per position ID.
struct BudgetConfig {
  std::int64_t packet_bits = 12000;
  std::int64_t packets = 10;
  std::int64_t header_bits = kHeaderBits;
  std::int64_t dimension = 0;
  int position_bits = 0;

  static BudgetConfig make(std::int64_t dimension, std::int64_t packet_bits, std::int64_t packets,
                           std::int64_t header_bits = kHeaderBits);

  // Throws InvalidInput unless b > H + s + 1, R >= 1, d >= 1 and s matches d.
  void validate() const;

  std::int64_t payload_bits() const noexcept { return packet_bits - header_bits; }
  // Largest packet population that still leaves one bit per centroid ID.
  std::int64_t max_per_packet() const noexcept { return payload_bits() / (position_bits + 1); }
  std::int64_t k_min() const noexcept { return packets; }
  std::int64_t k_max() const noexcept;
};

// y = floor((b - H)/P) - s clamped to at most 32; 0 when below one bit.
int code_bits_for(std::int64_t count, const BudgetConfig& cfg);

// Scale factor B = prev_max_q + 1 applied to the quantized updates, with
// companion B_c = B/(B - 1). prev_max_q is the largest per-packet Q of the
// previous round's plan.
struct ScaleState {
  double prev_max_q = 0.0;

  double scale() const noexcept { return prev_max_q + 1.0; }
  double companion() const noexcept;
  // 1/B_c^2 = ((B - 1)/B)^2, computed from prev_max_q to stay exact near B = 1.
  double inv_companion_sq() const noexcept;

  static ScaleState from_max_q(double max_q);
  // Worst case of one bit per update: Q(kind, k_max/R, 1).
  static ScaleState initial(QuantizerKind kind, const BudgetConfig& cfg);
  // B = 1, used by baselines that do not scale.
  static ScaleState unscaled() { return ScaleState{}; }
};

struct PartitionPlan {
  std::int64_t k = 0;
  std::vector<std::int64_t> parts;  // P_1..P_R, descending-magnitude order
  std::vector<int> code_bits;       // y_1..y_R
  double gamma = 1.0;
  ScaleState scale;       // scale the receiver divides by this round
  ScaleState next_scale;  // carried to the client's next round
  bool scale_raised = false;

  double max_quant_error(QuantizerKind kind) const;
};

struct OptimizerOptions {
  std::int64_t k_stride = 1;
  int max_sweeps = 100;
  // Also run SMO from the previous k's winner grown by one stride in each
  // packet, keeping the best fixed point.
  bool warm_start = true;
};

// Relative error bound for top-k updates split into packets of the given
// sizes, ranks ascending: tail + sum_r (Q_r/B^2 + 1/B_c^2)(Z_r^b - Z_{r-1}^b),
// normalized by d^b - 1, with Z_0 = 1. Code lengths follow code_bits_for.
double gamma(const PowerLawFit& fit, std::span<const std::int64_t> parts, const BudgetConfig& cfg,
             const ScaleState& scale, QuantizerKind kind);

// Same bound with explicit per-packet code lengths.
double gamma_with_bits(const PowerLawFit& fit, std::span<const std::int64_t> parts,
                       std::span<const int> code_bits, const BudgetConfig& cfg,
                       const ScaleState& scale, QuantizerKind kind);

// Results of PartitionObjective::atomic keyed by (X, Z_left). The split only
// depends on that pair, so one cache can serve every SMO run of a k-sweep.
class AtomicCache {
 public:
  explicit AtomicCache(const BudgetConfig& cfg);

 private:
  friend class PartitionObjective;
  std::int64_t max_total_ = 0;
  std::int64_t max_z_ = 0;
  std::vector<std::int32_t> p_right_;  // 0 unknown, -1 infeasible
};

// Precomputed tables for one (fit, budget, scale, quantizer) tuple. The
// search routines below evaluate the objective through these.
class PartitionObjective {
 public:
  PartitionObjective(const PowerLawFit& fit, const BudgetConfig& cfg, const ScaleState& scale,
                     QuantizerKind kind);

  const BudgetConfig& budget() const noexcept { return cfg_; }

  double gamma(std::span<const std::int64_t> parts) const;

  // Two-packet objective f for packets (P_left, P_right) starting after
  // `z_left` ranks; infinity when either packet is infeasible.
  double pair_value(std::int64_t z_left, std::int64_t p_left, std::int64_t p_right) const;

  // argmin over P_right in [ceil(X/2), X-1] of pair_value; nullopt when no
  // feasible split exists. Returns (P_left, P_right).
  std::optional<std::pair<std::int64_t, std::int64_t>> atomic(std::int64_t total,
                                                              std::int64_t z_left) const;

  // Repeated r = 2..R sweeps of atomic() until no pair strictly improves or
  // max_sweeps is reached.
  std::vector<std::int64_t> smo(std::vector<std::int64_t> parts, int max_sweeps,
                                int* sweeps_used = nullptr, AtomicCache* cache = nullptr) const;

 private:
  BudgetConfig cfg_;
  double beta_ = -1.0;
  double denom_ = 0.0;            // d^beta - 1
  std::vector<double> coef_;      // (Q(P)/B^2 + 1/B_c^2) / denom_, by P
  std::vector<double> zpow_;      // Z^beta with zpow_[0] = 1
};

// Atomic re-split of X updates in two adjacent packets after z_left ranks.
// Throws Infeasible when no split gives both packets at least one bit.
std::pair<std::int64_t, std::int64_t> atomic_optimize(std::int64_t total, std::int64_t z_left,
                                                      const PowerLawFit& fit,
                                                      const BudgetConfig& cfg,
                                                      const ScaleState& scale, QuantizerKind kind);

// Starting split floor(k/R) with the remainder on the last packets.
std::vector<std::int64_t> equal_split(std::int64_t k, std::int64_t packets);

std::vector<std::int64_t> smo_partition(std::int64_t k, const PowerLawFit& fit,
                                        const BudgetConfig& cfg, const ScaleState& scale,
                                        QuantizerKind kind, int max_sweeps = 100);

// k-sweep over [k_min, k_max] keeping the plan with smallest gamma in (0, 1).
// Throws Infeasible when no k yields such a plan.
PartitionPlan optimize_plan(const PowerLawFit& fit, const BudgetConfig& cfg, const ScaleState& scale,
                            QuantizerKind kind, const OptimizerOptions& options = {});

// Baseline with one code length for every packet: floor((b-H)/(s+y)) updates
// per packet, k = min(R * that, d).
PartitionPlan fixed_length_plan(int code_bits, const BudgetConfig& cfg, const PowerLawFit& fit,
                                const ScaleState& scale, QuantizerKind kind);

}  // namespace fedcvlc
