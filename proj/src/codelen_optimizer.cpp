#include "fedcvlc/codelen_optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedcvlc/error.hpp"
#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxScaleRaises = 4;

double sparsification_term(double beta, std::int64_t d, std::int64_t k) {
  // Nothing is dropped once k reaches d; the closed form would go negative.
  if (k >= d) return 0.0;
  const double d_beta = std::pow(static_cast<double>(d), beta);
  return (d_beta - std::pow(static_cast<double>(k + 1), beta)) / (d_beta - 1.0);
}

double packet_coefficient(double q, const ScaleState& scale) {
  const double b = scale.scale();
  return q / (b * b) + scale.inv_companion_sq();
}

void check_fit_dimension(const BudgetConfig& cfg) {
  if (cfg.dimension < 2) throw Error(ErrorCode::kInvalidInput, "error bound needs d >= 2");
}

}  // namespace

int position_bits_for(std::int64_t dimension) {
  if (dimension <= 2) return 1;
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(dimension - 1)));
}

BudgetConfig BudgetConfig::make(std::int64_t dimension, std::int64_t packet_bits,
                                std::int64_t packets, std::int64_t header_bits) {
  BudgetConfig cfg;
  cfg.dimension = dimension;
  cfg.packet_bits = packet_bits;
  cfg.packets = packets;
  cfg.header_bits = header_bits;
  cfg.position_bits = position_bits_for(dimension);
  cfg.validate();
  return cfg;
}

void BudgetConfig::validate() const {
  if (dimension < 1) throw Error(ErrorCode::kInvalidInput, "budget needs d >= 1");
  if (packets < 1) throw Error(ErrorCode::kInvalidInput, "budget needs R >= 1");
  if (header_bits < 0) throw Error(ErrorCode::kInvalidInput, "header bits must be non-negative");
  if (position_bits != position_bits_for(dimension)) {
    throw Error(ErrorCode::kInvalidInput, "position bits must equal ceil(log2 d)");
  }
  if (packet_bits <= header_bits + position_bits + 1) {
    throw Error(ErrorCode::kInvalidInput,
                "packet of " + std::to_string(packet_bits) + " bits cannot hold one entry");
  }
}

std::int64_t BudgetConfig::k_max() const noexcept {
  return std::min(packets * max_per_packet(), dimension);
}

int code_bits_for(std::int64_t count, const BudgetConfig& cfg) {
  if (count < 1) return 0;
  const std::int64_t y = cfg.payload_bits() / count - cfg.position_bits;
  if (y < kMinCodeBits) return 0;
  return static_cast<int>(std::min<std::int64_t>(y, kMaxCodeBits));
}

double ScaleState::companion() const noexcept {
  if (prev_max_q <= 0.0) return kInf;
  return (prev_max_q + 1.0) / prev_max_q;
}

double ScaleState::inv_companion_sq() const noexcept {
  const double r = prev_max_q / (prev_max_q + 1.0);
  return r * r;
}

ScaleState ScaleState::from_max_q(double max_q) { return ScaleState{std::max(0.0, max_q)}; }

ScaleState ScaleState::initial(QuantizerKind kind, const BudgetConfig& cfg) {
  const std::int64_t per_packet = std::max<std::int64_t>(1, cfg.k_max() / cfg.packets);
  return from_max_q(quant_error_model(kind, per_packet, kMinCodeBits));
}

double PartitionPlan::max_quant_error(QuantizerKind kind) const {
  double worst = 0.0;
  for (std::size_t r = 0; r < parts.size(); ++r) {
    worst = std::max(worst, quant_error_model(kind, parts[r], code_bits[r]));
  }
  return worst;
}

double gamma_with_bits(const PowerLawFit& fit, std::span<const std::int64_t> parts,
                       std::span<const int> code_bits, const BudgetConfig& cfg,
                       const ScaleState& scale, QuantizerKind kind) {
  check_fit_dimension(cfg);
  if (parts.size() != code_bits.size()) {
    throw Error(ErrorCode::kInvalidInput, "parts and code_bits differ in length");
  }
  const double beta = fit.beta;
  const double denom = std::pow(static_cast<double>(cfg.dimension), beta) - 1.0;
  std::int64_t z = 0;
  double prev_pow = 1.0;  // Z_0 = 1
  double quantized = 0.0;
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r] < 1) throw Error(ErrorCode::kInvalidInput, "packet populations must be positive");
    z += parts[r];
    if (z > cfg.dimension) throw Error(ErrorCode::kInvalidInput, "k exceeds the model dimension");
    const double z_pow = std::pow(static_cast<double>(z), beta);
    const double q = quant_error_model(kind, parts[r], code_bits[r]);
    quantized += packet_coefficient(q, scale) * (z_pow - prev_pow);
    prev_pow = z_pow;
  }
  return sparsification_term(beta, cfg.dimension, z) + quantized / denom;
}

double gamma(const PowerLawFit& fit, std::span<const std::int64_t> parts, const BudgetConfig& cfg,
             const ScaleState& scale, QuantizerKind kind) {
  std::vector<int> bits(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r] < 1) throw Error(ErrorCode::kInvalidInput, "every packet needs at least one update");
    bits[r] = code_bits_for(parts[r], cfg);
    if (bits[r] == 0) {
      throw Error(ErrorCode::kInfeasible,
                  "packet with " + std::to_string(parts[r]) + " updates leaves no centroid bit");
    }
  }
  return gamma_with_bits(fit, parts, bits, cfg, scale, kind);
}

PartitionObjective::PartitionObjective(const PowerLawFit& fit, const BudgetConfig& cfg,
                                       const ScaleState& scale, QuantizerKind kind)
    : cfg_(cfg), beta_(fit.beta) {
  cfg_.validate();
  check_fit_dimension(cfg_);
  denom_ = std::pow(static_cast<double>(cfg_.dimension), beta_) - 1.0;

  const std::int64_t p_max = cfg_.max_per_packet();
  coef_.assign(static_cast<std::size_t>(p_max) + 1, kInf);
  for (std::int64_t p = 1; p <= p_max; ++p) {
    const double q = quant_error_model(kind, p, code_bits_for(p, cfg_));
    coef_[p] = packet_coefficient(q, scale) / denom_;
  }

  // Prefix counts can reach k_max; the pair scan also reads one past it.
  const std::int64_t z_max = cfg_.k_max() + 1;
  zpow_.resize(static_cast<std::size_t>(z_max) + 1);
  zpow_[0] = 1.0;
  for (std::int64_t z = 1; z <= z_max; ++z) zpow_[z] = std::pow(static_cast<double>(z), beta_);
}

double PartitionObjective::gamma(std::span<const std::int64_t> parts) const {
  std::int64_t z = 0;
  double total = 0.0;
  const std::int64_t p_max = cfg_.max_per_packet();
  for (std::int64_t p : parts) {
    if (p < 1 || p > p_max) return kInf;
    total += coef_[p] * (zpow_[z + p] - zpow_[z]);
    z += p;
  }
  return sparsification_term(beta_, cfg_.dimension, z) + total;
}

double PartitionObjective::pair_value(std::int64_t z_left, std::int64_t p_left,
                                      std::int64_t p_right) const {
  const std::int64_t p_max = cfg_.max_per_packet();
  if (p_left < 1 || p_right < 1 || p_left > p_max || p_right > p_max) return kInf;
  const double mid = zpow_[z_left + p_left];
  return coef_[p_right] * (zpow_[z_left + p_left + p_right] - mid) +
         coef_[p_left] * (mid - zpow_[z_left]);
}

std::optional<std::pair<std::int64_t, std::int64_t>> PartitionObjective::atomic(
    std::int64_t total, std::int64_t z_left) const {
  if (total < 2 || z_left < 0 || z_left + total > cfg_.k_max()) return std::nullopt;
  const std::int64_t p_max = cfg_.max_per_packet();
  simd::PairScanArgs args;
  args.coef = coef_.data();
  args.zpow = zpow_.data();
  args.total = total;
  args.base = z_left;
  args.p_lo = std::max((total + 1) / 2, total - p_max);
  args.p_hi = std::min(total - 1, p_max);
  args.z_left = zpow_[z_left];
  args.z_right = zpow_[z_left + total];
  const simd::PairScanResult best = simd::active_kernels().pair_argmin(args);
  if (best.p_right < 0) return std::nullopt;
  return std::make_pair(total - best.p_right, best.p_right);
}

AtomicCache::AtomicCache(const BudgetConfig& cfg)
    : max_total_(2 * cfg.max_per_packet()), max_z_(cfg.k_max()) {
  p_right_.assign(static_cast<std::size_t>((max_total_ + 1) * (max_z_ + 1)), 0);
}

std::vector<std::int64_t> PartitionObjective::smo(std::vector<std::int64_t> parts, int max_sweeps,
                                                  int* sweeps_used, AtomicCache* cache) const {
  auto split_of = [&](std::int64_t total,
                      std::int64_t z_left) -> std::optional<std::pair<std::int64_t, std::int64_t>> {
    if (cache == nullptr || total > cache->max_total_ || z_left > cache->max_z_) {
      return atomic(total, z_left);
    }
    std::int32_t& slot = cache->p_right_[static_cast<std::size_t>(z_left * (cache->max_total_ + 1) + total)];
    if (slot == 0) {
      const auto split = atomic(total, z_left);
      slot = split ? static_cast<std::int32_t>(split->second) : -1;
    }
    if (slot < 0) return std::nullopt;
    return std::make_pair(total - slot, std::int64_t{slot});
  };

  int sweeps = 0;
  bool converged = parts.size() < 2;
  while (!converged && sweeps < max_sweeps) {
    ++sweeps;
    bool changed = false;
    std::int64_t z_left = 0;
    for (std::size_t r = 1; r < parts.size(); ++r) {
      const auto split = split_of(parts[r - 1] + parts[r], z_left);
      if (!split) {
        throw Error(ErrorCode::kInfeasible, "no feasible split of packets " + std::to_string(r) +
                                                " and " + std::to_string(r + 1));
      }
      // Equal-valued splits are left alone so ties cannot cycle; an
      // out-of-order pair always moves back into [X/2, X).
      const bool ordered = parts[r] >= parts[r - 1];
      if (split->first != parts[r - 1] &&
          (!ordered || pair_value(z_left, split->first, split->second) <
                           pair_value(z_left, parts[r - 1], parts[r]))) {
        parts[r - 1] = split->first;
        parts[r] = split->second;
        changed = true;
      }
      z_left += parts[r - 1];
    }
    converged = !changed;
  }
  // A capped run may stop between fixed points; restore the packet ordering.
  if (!converged) std::sort(parts.begin(), parts.end());
  if (sweeps_used != nullptr) *sweeps_used = sweeps;
  return parts;
}

std::pair<std::int64_t, std::int64_t> atomic_optimize(std::int64_t total, std::int64_t z_left,
                                                      const PowerLawFit& fit,
                                                      const BudgetConfig& cfg,
                                                      const ScaleState& scale, QuantizerKind kind) {
  if (total < 2) throw Error(ErrorCode::kInvalidInput, "atomic re-split needs X >= 2");
  if (z_left < 0 || z_left + total > cfg.k_max()) {
    throw Error(ErrorCode::kInvalidInput, "re-split range exceeds k_max");
  }
  const PartitionObjective objective(fit, cfg, scale, kind);
  const auto split = objective.atomic(total, z_left);
  if (!split) {
    throw Error(ErrorCode::kInfeasible,
                "no split of " + std::to_string(total) + " updates leaves both packets a bit");
  }
  return *split;
}

std::vector<std::int64_t> equal_split(std::int64_t k, std::int64_t packets) {
  std::vector<std::int64_t> parts(static_cast<std::size_t>(packets), k / packets);
  const std::int64_t remainder = k % packets;
  for (std::int64_t i = 0; i < remainder; ++i) ++parts[packets - 1 - i];
  return parts;
}

std::vector<std::int64_t> smo_partition(std::int64_t k, const PowerLawFit& fit,
                                        const BudgetConfig& cfg, const ScaleState& scale,
                                        QuantizerKind kind, int max_sweeps) {
  cfg.validate();
  if (k < cfg.k_min()) throw Error(ErrorCode::kInvalidInput, "k must be at least R");
  if (k > cfg.k_max()) throw Error(ErrorCode::kInfeasible, "k exceeds k_max");
  const PartitionObjective objective(fit, cfg, scale, kind);
  return objective.smo(equal_split(k, cfg.packets), max_sweeps);
}

namespace {

PartitionPlan finalize_plan(std::vector<std::int64_t> parts, std::vector<int> bits,
                            const PowerLawFit& fit, const BudgetConfig& cfg,
                            const ScaleState& scale, QuantizerKind kind) {
  PartitionPlan plan;
  plan.k = std::accumulate(parts.begin(), parts.end(), std::int64_t{0});
  plan.parts = std::move(parts);
  plan.code_bits = std::move(bits);
  plan.scale = scale;
  plan.gamma = gamma_with_bits(fit, plan.parts, plan.code_bits, cfg, plan.scale, kind);
  plan.next_scale = ScaleState::from_max_q(plan.max_quant_error(kind));
  return plan;
}

}  // namespace

namespace {

// Best partition over the k sweep at one scale; empty when no k gives
// 0 < gamma < 1.
std::vector<std::int64_t> search_partition(const PowerLawFit& fit, const BudgetConfig& cfg,
                                           const ScaleState& scale, QuantizerKind kind,
                                           const OptimizerOptions& options) {
  const PartitionObjective objective(fit, cfg, scale, kind);
  AtomicCache cache(cfg);
  const std::int64_t p_max = cfg.max_per_packet();

  std::vector<std::int64_t> best_parts;
  double best_gamma = kInf;
  std::vector<std::int64_t> previous;  // winner of the previous k, for warm starts
  std::int64_t previous_k = 0;
  std::vector<std::vector<std::int64_t>> starts;

  for (std::int64_t k = cfg.k_min(); k <= cfg.k_max(); k += options.k_stride) {
    starts.clear();
    starts.push_back(equal_split(k, cfg.packets));
    if (options.warm_start && !previous.empty() && cfg.packets > 1) {
      const std::int64_t grow = k - previous_k;
      for (std::size_t r = 0; r < previous.size(); ++r) {
        std::vector<std::int64_t> start = previous;
        start[r] += grow;
        if (start[r] > p_max) continue;
        std::sort(start.begin(), start.end());
        if (std::find(starts.begin(), starts.end(), start) == starts.end()) {
          starts.push_back(std::move(start));
        }
      }
    }

    // The starting points stay candidates, so every equal split is a
    // feasible point of the search even if a sweep ends somewhere worse.
    std::vector<std::int64_t> winner;
    double winner_gamma = kInf;
    auto consider = [&](std::vector<std::int64_t> parts) {
      const double g = objective.gamma(parts);
      if (g < winner_gamma || winner.empty()) {
        winner_gamma = g;
        winner = std::move(parts);
      }
    };
    for (auto& start : starts) {
      consider(objective.smo(start, options.max_sweeps, nullptr, &cache));
      consider(std::move(start));
    }
    previous = winner;
    previous_k = k;

    if (winner_gamma > 0.0 && winner_gamma < 1.0 && winner_gamma < best_gamma) {
      best_gamma = winner_gamma;
      best_parts = std::move(winner);
    }
  }
  return best_parts;
}

PartitionPlan plan_at(const PowerLawFit& fit, const BudgetConfig& cfg, const ScaleState& scale,
                      QuantizerKind kind, const OptimizerOptions& options) {
  std::vector<std::int64_t> parts = search_partition(fit, cfg, scale, kind, options);
  if (parts.empty()) {
    throw Error(ErrorCode::kInfeasible, "no k in [" + std::to_string(cfg.k_min()) + ", " +
                                            std::to_string(cfg.k_max()) + "] gives 0 < gamma < 1");
  }
  std::vector<int> bits(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) bits[r] = code_bits_for(parts[r], cfg);
  return finalize_plan(std::move(parts), std::move(bits), fit, cfg, scale, kind);
}

// B must exceed (max Q + 1)/2 for the bound to hold.
bool scale_is_sound(const PartitionPlan& plan, QuantizerKind kind) {
  return plan.scale.scale() > (plan.max_quant_error(kind) + 1.0) / 2.0;
}

}  // namespace

PartitionPlan optimize_plan(const PowerLawFit& fit, const BudgetConfig& cfg, const ScaleState& scale,
                            QuantizerKind kind, const OptimizerOptions& options) {
  if (options.k_stride < 1) throw Error(ErrorCode::kInvalidInput, "k_stride must be >= 1");
  PartitionPlan plan = plan_at(fit, cfg, scale, kind, options);
  if (scale_is_sound(plan, kind)) return plan;

  // Raise B to this plan's max Q + 1 and search again at the raised scale,
  // so the returned plan is the search winner at the scale it reports.
  for (int attempt = 0; attempt < kMaxScaleRaises; ++attempt) {
    PartitionPlan raised = plan_at(fit, cfg, ScaleState::from_max_q(plan.max_quant_error(kind)), kind, options);
    raised.scale_raised = true;
    const bool sound = scale_is_sound(raised, kind);
    plan = std::move(raised);
    if (sound) return plan;
  }
  // Still short after the retries: keep the last partition at a scale that
  // covers it.
  plan.scale = ScaleState::from_max_q(plan.max_quant_error(kind));
  plan.gamma = gamma_with_bits(fit, plan.parts, plan.code_bits, cfg, plan.scale, kind);
  return plan;
}

PartitionPlan fixed_length_plan(int code_bits, const BudgetConfig& cfg, const PowerLawFit& fit,
                                const ScaleState& scale, QuantizerKind kind) {
  cfg.validate();
  if (code_bits < kMinCodeBits || code_bits > kMaxCodeBits) {
    throw Error(ErrorCode::kInvalidBits, "fixed code length must be in [1, 32]");
  }
  const std::int64_t per_packet = cfg.payload_bits() / (cfg.position_bits + code_bits);
  if (per_packet < 1) {
    throw Error(ErrorCode::kInfeasible, "a packet cannot hold one " +
                                            std::to_string(code_bits) + "-bit update");
  }
  const std::int64_t k = std::min(cfg.packets * per_packet, cfg.dimension);
  const std::int64_t used_packets = (k + per_packet - 1) / per_packet;
  std::vector<std::int64_t> parts = equal_split(k, used_packets);
  std::vector<int> bits(parts.size(), code_bits);
  return finalize_plan(std::move(parts), std::move(bits), fit, cfg, scale, kind);
}

}  // namespace fedcvlc
