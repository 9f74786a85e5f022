#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "fedcvlc/fl/config.hpp"
#include "fedcvlc/fl/dataset.hpp"
#include "fedcvlc/fl/model.hpp"

namespace fedcvlc::fl {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-client record of one round.
struct ClientRound {
  int client = 0;
  std::size_t bytes = 0;
  double gamma = kNaN;
  double measured_error = kNaN;
  // fed_cvlc only: the fixed-length baselines' bound under the same fit,
  // budget and scale.
  double gamma_fixed6 = kNaN;
  double gamma_topk = kNaN;
  bool scale_raised = false;
};

struct RoundMetrics {
  int round = 0;
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  std::size_t uplink_bytes_total = 0;  // this round, all participating clients
  double mean_gamma = kNaN;            // over clients with a defined bound
  double mean_measured_error = kNaN;
  std::vector<ClientRound> clients;
};

// Data, model and starting weights of a run.
struct FederatedSetup {
  FederatedData data;
  Model model;
  std::vector<double> w0;
};

FederatedSetup prepare(const FLConfig& cfg);

// Sorted ids of the clients sampled in `round`, without replacement.
std::vector<int> sample_clients(std::uint64_t seed, int round, int n_clients, int per_round);

// Seeds of the per-client local training and quantization streams.
std::uint64_t train_seed(std::uint64_t seed, int round, int client);
std::uint64_t compression_seed(std::uint64_t seed, int round, int client);

// Called after aggregation with the new global weights.
using RoundCallback = std::function<void(const RoundMetrics&, std::span<const double> w)>;

std::vector<RoundMetrics> run_federated(const FLConfig& cfg, const RoundCallback& on_round = {});
std::vector<RoundMetrics> run_federated(const FLConfig& cfg, const FederatedSetup& setup,
                                        const RoundCallback& on_round = {});

}  // namespace fedcvlc::fl
