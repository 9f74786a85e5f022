#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedcvlc/fl/config.hpp"
#include "fedcvlc/fl/simulator.hpp"

namespace fedcvlc::fl {

// Exactly one of the two is set: an absolute test accuracy, or a fraction of
// the final accuracy of an uncompressed run with the same seed.
struct SweepTarget {
  std::optional<double> accuracy;
  std::optional<double> oracle_fraction;
};

struct SweepSpec {
  FLConfig base;
  std::vector<CompressorSpec> compressors;
  std::vector<std::uint64_t> seeds;
  SweepTarget target;

  void validate() const;
};

struct SweepRow {
  std::string compressor;
  std::optional<std::uint64_t> seed;  // empty on aggregate rows
  double target_accuracy = kNaN;
  std::optional<double> rounds_to_target;  // empty when unreached
  std::optional<double> bytes_to_target;
  double final_accuracy = kNaN;
};

struct TargetHit {
  int rounds = 0;          // rounds run, including the one that hit
  std::size_t bytes = 0;   // uplink bytes through that round
};

std::optional<TargetHit> first_hit(const std::vector<RoundMetrics>& history, double target);

SweepSpec sweep_spec_from_json(const nlohmann::json& j);

// One row per (compressor, seed) in spec order, then one mean row per
// compressor over the seeds that reached the target.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& history);

}  // namespace fedcvlc::fl
