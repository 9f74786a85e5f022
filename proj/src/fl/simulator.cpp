#include "fedcvlc/fl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "fedcvlc/compression_pipeline.hpp"
#include "fedcvlc/error.hpp"
#include "fedcvlc/parallel.hpp"
#include "fedcvlc/rng.hpp"

namespace fedcvlc::fl {
namespace {

enum Stream : std::uint64_t { kData = 1, kInit, kSampling, kTraining, kCompression };

std::uint64_t stream(std::uint64_t seed, Stream s) { return derive_key(seed, s); }

std::uint64_t round_client_key(std::uint64_t key, int round, int client) {
  return derive_key(derive_key(key, static_cast<std::uint64_t>(round)), static_cast<std::uint64_t>(client));
}

// Compression state a client carries between the rounds it takes part in.
struct ClientState {
  std::optional<ScaleState> scale;
  std::optional<ErrorFeedback> feedback;
};

CompressionConfig compression_config(const CompressorSpec& spec, const BudgetConfig& budget) {
  CompressionConfig cfg = spec.kind == CompressorKind::kFedCvlc
                              ? CompressionConfig::variable_length(spec.quantizer, budget)
                              : CompressionConfig::fixed_length(spec.bits, spec.quantizer, budget);
  cfg.k_stride = spec.k_stride;
  cfg.error_feedback = spec.error_feedback;
  return cfg;
}

double baseline_gamma(int bits, const CompressedRound& round, const BudgetConfig& budget, QuantizerKind kind) {
  try {
    return fixed_length_plan(bits, budget, *round.fit, round.plan.scale, kind).gamma;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInfeasible) throw;
    return kNaN;
  }
}

// Compresses u for one client and returns what the server reconstructs.
UpdateVector transmit(const UpdateVector& u, const CompressorSpec& spec, const BudgetConfig& budget,
                      std::uint64_t seed, ClientState& state, ClientRound& record) {
  if (spec.kind == CompressorKind::kNone) {
    record.bytes = u.dimension() * sizeof(double);
    record.measured_error = 0.0;
    return u;
  }

  const CompressionConfig cfg = compression_config(spec, budget);
  UpdateVector sent = u;
  if (spec.error_feedback) {
    if (!state.feedback) state.feedback.emplace(u.dimension());
    sent = state.feedback->corrected(u);
  }

  CompressedRound round;
  double scale_b = 1.0;
  bool scale_sent = false;
  if (spec.kind == CompressorKind::kFedCvlc) {
    if (!state.scale) state.scale = ScaleState::initial(spec.quantizer, budget);
    try {
      round = compress(sent, cfg, *state.scale, seed);
      state.scale = round.plan.next_scale;
      scale_b = round.plan.scale.scale();
      scale_sent = true;
      record.gamma = round.plan.gamma;
      record.scale_raised = round.plan.scale_raised;
      record.gamma_fixed6 = baseline_gamma(6, round, budget, spec.quantizer);
      record.gamma_topk = baseline_gamma(kMaxCodeBits, round, budget, spec.quantizer);
    } catch (const Error& e) {
      // No power law to fit (for example an all-zero update): ship plain
      // top-k within the same budget.
      if (e.code() != ErrorCode::kDegenerateDistribution) throw;
      round = compress(sent, compression_config(CompressorSpec::parse("topk"), budget), ScaleState::unscaled(),
                       seed);
    }
  } else {
    round = compress(sent, cfg, ScaleState::unscaled(), seed);
    record.gamma = round.plan.gamma;
  }

  UpdateVector received = decompress(round.packets, u.dimension(), scale_b);
  record.bytes = round.packet_bytes() + (scale_sent ? kScaleMetadataBytes : 0);
  record.measured_error = measured_error(sent, received);
  if (spec.error_feedback) state.feedback->record(sent, received);
  return received;
}

double mean_defined(const std::vector<ClientRound>& clients, double ClientRound::*field) {
  double sum = 0.0;
  int n = 0;
  for (const ClientRound& c : clients) {
    if (std::isnan(c.*field)) continue;
    sum += c.*field;
    ++n;
  }
  return n > 0 ? sum / n : kNaN;
}

}  // namespace

FederatedSetup prepare(const FLConfig& cfg) {
  cfg.validate();
  const std::uint64_t data_seed = stream(cfg.seed, kData);
  FederatedData data;
  if (cfg.data.source == DataSpec::Source::kSynthetic) {
    data = generate_synthetic(cfg.data.synthetic, cfg.n_clients, data_seed);
  } else {
    const Dataset train = read_idx(cfg.data.train_images, cfg.data.train_labels);
    Dataset test = read_idx(cfg.data.test_images, cfg.data.test_labels);
    data = partition_dataset(train, std::move(test), cfg.data.idx_classes, cfg.n_clients,
                             cfg.data.synthetic.partition, data_seed);
  }
  Model model(cfg.model, data.test.features, data.classes);
  std::vector<double> w0 = model.initial_parameters(stream(cfg.seed, kInit));
  return FederatedSetup{std::move(data), std::move(model), std::move(w0)};
}

std::vector<int> sample_clients(std::uint64_t seed, int round, int n_clients, int per_round) {
  if (per_round < 1 || per_round > n_clients) {
    throw Error(ErrorCode::kInvalidInput, "clients_per_round must be in [1, n_clients]");
  }
  std::vector<int> ids(static_cast<std::size_t>(n_clients));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 gen(derive_key(stream(seed, kSampling), static_cast<std::uint64_t>(round)));
  for (std::size_t j = 0; j < static_cast<std::size_t>(per_round); ++j) {
    std::swap(ids[j], ids[std::uniform_int_distribution<std::size_t>(j, ids.size() - 1)(gen)]);
  }
  ids.resize(static_cast<std::size_t>(per_round));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::uint64_t train_seed(std::uint64_t seed, int round, int client) {
  return round_client_key(stream(seed, kTraining), round, client);
}

std::uint64_t compression_seed(std::uint64_t seed, int round, int client) {
  return round_client_key(stream(seed, kCompression), round, client);
}

std::vector<RoundMetrics> run_federated(const FLConfig& cfg, const RoundCallback& on_round) {
  return run_federated(cfg, prepare(cfg), on_round);
}

std::vector<RoundMetrics> run_federated(const FLConfig& cfg, const FederatedSetup& setup,
                                        const RoundCallback& on_round) {
  cfg.validate();
  if (static_cast<int>(setup.data.clients.size()) != cfg.n_clients) {
    throw Error(ErrorCode::kInvalidInput, "setup has a different client count");
  }
  const Model& model = setup.model;
  const auto d = static_cast<std::int64_t>(model.parameter_count());
  const BudgetConfig budget = cfg.budget(d);
  if (cfg.compressor.kind != CompressorKind::kNone) budget.validate();

  std::vector<double> w = setup.w0;
  std::vector<ClientState> states(static_cast<std::size_t>(cfg.n_clients));
  std::vector<RoundMetrics> history;
  history.reserve(static_cast<std::size_t>(cfg.rounds));
  std::size_t train_samples = 0;
  for (const Dataset& shard : setup.data.clients) train_samples += shard.size();

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::vector<int> chosen = sample_clients(cfg.seed, t, cfg.n_clients, cfg.clients_per_round);
    RoundMetrics m;
    m.round = t;
    m.clients.resize(chosen.size());
    std::vector<UpdateVector> received(chosen.size());
    parallel_for(chosen.size(), [&](std::size_t j) {
      const int c = chosen[j];
      const Dataset& shard = setup.data.clients[static_cast<std::size_t>(c)];
      const UpdateVector u = local_train(model, w, shard, cfg.train, train_seed(cfg.seed, t, c));
      m.clients[j].client = c;
      received[j] = transmit(u, cfg.compressor, budget, compression_seed(cfg.seed, t, c),
                             states[static_cast<std::size_t>(c)], m.clients[j]);
    });
    w = aggregate(w, received);

    for (const ClientRound& c : m.clients) m.uplink_bytes_total += c.bytes;
    m.mean_gamma = mean_defined(m.clients, &ClientRound::gamma);
    m.mean_measured_error = mean_defined(m.clients, &ClientRound::measured_error);
    m.test_accuracy = model.accuracy(w, setup.data.test);
    double loss_sum = 0.0;
    for (const Dataset& shard : setup.data.clients) {
      if (shard.size() > 0) loss_sum += model.loss(w, shard) * static_cast<double>(shard.size());
    }
    m.train_loss = loss_sum / static_cast<double>(train_samples);
    if (on_round) on_round(m, w);
    history.push_back(std::move(m));
  }
  return history;
}

}  // namespace fedcvlc::fl
