#include "fedcvlc/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <set>

#include "fedcvlc/compression_pipeline.hpp"
#include "fedcvlc/error.hpp"
#include "fedcvlc/fl/config.hpp"
#include "fedcvlc/fl/simulator.hpp"
#include "fedcvlc/fl/sweep.hpp"

namespace fedcvlc::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::kInvalidInput, message); }

std::int64_t int_field(const json& j, const char* key, std::optional<std::int64_t> fallback) {
  if (!j.contains(key)) {
    if (!fallback) bad(std::string("config needs '") + key + "'");
    return *fallback;
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) bad(std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

// Settings shared by optimize and compress.
struct RoundConfig {
  BudgetConfig budget;
  QuantizerKind quantizer = QuantizerKind::kPq;
  std::int64_t k_stride = 1;
  fl::CompressorSpec compressor = fl::CompressorSpec::parse("fed_cvlc");
  std::optional<double> prev_max_q;
  std::int64_t client_id = 0;
  std::int64_t round = 0;
  std::uint64_t seed = 1;

  bool variable() const { return compressor.kind == fl::CompressorKind::kFedCvlc; }

  ScaleState scale() const {
    if (!variable()) return ScaleState::unscaled();
    return prev_max_q ? ScaleState::from_max_q(*prev_max_q) : ScaleState::initial(quantizer, budget);
  }

  CompressionConfig compression() const {
    CompressionConfig cfg = variable() ? CompressionConfig::variable_length(quantizer, budget)
                                       : CompressionConfig::fixed_length(compressor.bits, quantizer, budget);
    cfg.k_stride = k_stride;
    return cfg;
  }
};

RoundConfig round_config(const json& j, std::int64_t dimension) {
  static const std::set<std::string> kKeys{"b_bits", "R", "H_bits", "quantizer", "k_stride", "compressor",
                                           "prev_max_q", "client_id", "round", "seed"};
  if (!j.is_object()) bad("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) bad("unknown key '" + key + "' in config");
  }
  RoundConfig rc;
  rc.budget = BudgetConfig::make(dimension, int_field(j, "b_bits", std::nullopt), int_field(j, "R", std::nullopt),
                                 int_field(j, "H_bits", kHeaderBits));
  rc.budget.validate();
  if (j.contains("quantizer")) {
    if (!j["quantizer"].is_string()) bad("'quantizer' must be a string");
    rc.quantizer = parse_quantizer_kind(j["quantizer"].get<std::string>());
  }
  rc.k_stride = int_field(j, "k_stride", 1);
  if (j.contains("compressor")) rc.compressor = fl::compressor_from_json(j["compressor"]);
  if (rc.compressor.kind == fl::CompressorKind::kNone) bad("compressor 'none' has nothing to encode");
  if (j.contains("prev_max_q")) {
    const json& v = j["prev_max_q"];
    if (!v.is_number() || !(v.get<double>() >= 0.0)) bad("'prev_max_q' must be a non-negative number");
    rc.prev_max_q = v.get<double>();
  }
  rc.client_id = int_field(j, "client_id", 0);
  rc.round = int_field(j, "round", 0);
  const std::int64_t seed = int_field(j, "seed", 1);
  if (rc.client_id < 0 || rc.round < 0 || seed < 0) bad("client_id, round and seed must be non-negative");
  rc.seed = static_cast<std::uint64_t>(seed);
  return rc;
}

UpdateVector load_update(const std::string& path) {
  try {
    return read_uvec(path);
  } catch (const Error& e) {
    const std::string what = e.what();
    if (e.code() == ErrorCode::kIo && what.find("cannot read update vector") == std::string::npos) {
      throw Error(ErrorCode::kIo, "cannot read update vector: " + what);
    }
    throw;
  }
}

json plan_json(const PartitionPlan& plan) {
  return json{{"k", plan.k},
              {"parts", plan.parts},
              {"code_bits", plan.code_bits},
              {"gamma", plan.gamma},
              {"B", plan.scale.scale()}};
}

void apply_stride(RoundConfig& rc, std::optional<std::int64_t> stride) {
  if (stride) rc.k_stride = *stride;
  if (rc.k_stride < 1) bad("k_stride must be >= 1");
}

int cmd_optimize(const std::string& in, const std::string& config, std::optional<std::int64_t> stride,
                 std::ostream& out) {
  const UpdateVector u = load_update(in);
  RoundConfig rc = round_config(fl::read_json_file(config), static_cast<std::int64_t>(u.dimension()));
  apply_stride(rc, stride);
  const RankedUpdates ranked = rank_by_magnitude(u);
  const PowerLawFit fit = fit_power_law(ranked, u);
  const PartitionPlan plan =
      rc.variable() ? optimize_plan(fit, rc.budget, rc.scale(), rc.quantizer, OptimizerOptions{rc.k_stride})
                    : fixed_length_plan(rc.compressor.bits, rc.budget, fit, rc.scale(), rc.quantizer);
  out << plan_json(plan).dump() << '\n';
  return kExitOk;
}

int cmd_compress(const std::string& in, const std::string& config, const std::string& packets_out,
                 std::optional<std::int64_t> stride, std::optional<std::uint64_t> seed, std::ostream& out) {
  const UpdateVector u = load_update(in);
  RoundConfig rc = round_config(fl::read_json_file(config), static_cast<std::int64_t>(u.dimension()));
  apply_stride(rc, stride);
  if (seed) rc.seed = *seed;
  const CompressionConfig cfg = rc.compression();
  const std::uint64_t key =
      fl::compression_seed(rc.seed, static_cast<int>(rc.round), static_cast<int>(rc.client_id));
  const CompressedRound round = compress(u, cfg, rc.scale(), key);
  write_packet_file(packets_out, round.packets);
  json meta{{"client_id", rc.client_id},
            {"round", rc.round},
            {"B", round.plan.scale.scale()},
            {"gamma", round.plan.gamma},
            {"bytes", round.uplink_bytes(cfg)},
            {"d", u.dimension()},
            {"k", round.plan.k},
            {"packets", round.packets.size()}};
  if (rc.variable()) meta["next_prev_max_q"] = round.plan.next_scale.prev_max_q;
  out << meta.dump() << '\n';
  return kExitOk;
}

int cmd_decompress(const std::string& in, const std::string& meta_path, const std::string& uvec_out,
                   std::ostream& out) {
  const std::vector<PacketBytes> packets = read_packet_file(in);
  const json meta = fl::read_json_file(meta_path);
  if (!meta.is_object() || !meta.contains("d") || !meta["d"].is_number_unsigned()) {
    bad("round metadata needs a non-negative integer 'd'");
  }
  double scale_b = 1.0;
  if (meta.contains("B")) {
    if (!meta["B"].is_number()) bad("'B' must be a number");
    scale_b = meta["B"].get<double>();
  }
  if (!(scale_b >= 1.0)) bad("'B' must be >= 1");
  const UpdateVector u_hat = decompress(packets, meta["d"].get<std::size_t>(), scale_b);
  write_uvec(uvec_out, u_hat);
  const auto values = u_hat.values();
  const auto nonzeros = std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; });
  out << json{{"d", u_hat.dimension()}, {"nonzeros", nonzeros}, {"packets", packets.size()}}.dump() << '\n';
  return kExitOk;
}

// Writes to `path` when given, otherwise to `out`; returns whether a file was used.
bool write_csv(const std::string& path, std::ostream& out, const auto& write) {
  if (path.empty()) {
    write(out);
    return false;
  }
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + path);
  write(file);
  if (!file) throw Error(ErrorCode::kIo, "cannot write " + path);
  return true;
}

int cmd_simulate(const std::string& config, const std::string& csv, std::optional<std::uint64_t> seed,
                 std::ostream& out) {
  fl::FLConfig cfg = fl::fl_config_from_json(fl::read_json_file(config));
  if (seed) cfg.seed = *seed;
  const std::vector<fl::RoundMetrics> history = fl::run_federated(cfg);
  const bool to_file = write_csv(csv, out, [&](std::ostream& o) { fl::write_metrics_csv(o, history); });
  if (to_file) {
    std::size_t bytes = 0;
    for (const fl::RoundMetrics& m : history) bytes += m.uplink_bytes_total;
    out << json{{"rounds", history.size()},
                {"final_test_accuracy", history.back().test_accuracy},
                {"total_uplink_bytes", bytes}}
               .dump()
        << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config, const std::string& csv, std::ostream& out) {
  const fl::SweepSpec spec = fl::sweep_spec_from_json(fl::read_json_file(config));
  const std::vector<fl::SweepRow> rows = fl::run_sweep(spec);
  if (write_csv(csv, out, [&](std::ostream& o) { fl::write_sweep_csv(o, rows); })) {
    out << json{{"rows", rows.size()}}.dump() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fed-CVLC: variable-length compression of federated model updates"};
  app.name("fedcvlc");
  app.require_subcommand(1);

  std::string in, config, out_path, meta;
  std::optional<std::int64_t> stride;
  std::optional<std::uint64_t> seed;

  auto* optimize = app.add_subcommand("optimize", "Print the code-length plan for an update vector as JSON");
  optimize->add_option("--in", in, "Update vector file (.uvec)")->required();
  optimize->add_option("--config", config, "Budget config JSON")->required();
  optimize->add_option("--k-stride", stride, "Step of the k sweep");

  auto* compress_cmd = app.add_subcommand("compress", "Encode an update vector into packets");
  compress_cmd->add_option("--in", in, "Update vector file (.uvec)")->required();
  compress_cmd->add_option("--config", config, "Budget config JSON")->required();
  compress_cmd->add_option("--out", out_path, "Packet file to write")->required();
  compress_cmd->add_option("--k-stride", stride, "Step of the k sweep");
  compress_cmd->add_option("--seed", seed, "Override the config seed");

  auto* decompress_cmd = app.add_subcommand("decompress", "Rebuild a dense update vector from packets");
  decompress_cmd->add_option("--in", in, "Packet file")->required();
  decompress_cmd->add_option("--meta", meta, "Round metadata JSON printed by compress")->required();
  decompress_cmd->add_option("--out", out_path, "Update vector file to write")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a federated training simulation");
  simulate->add_option("--config", config, "FL config JSON")->required();
  simulate->add_option("--out", out_path, "Metrics CSV (stdout when omitted)");
  simulate->add_option("--seed", seed, "Override the config seed");

  auto* sweep = app.add_subcommand("sweep", "Compare compressors over seeds");
  sweep->add_option("--config", config, "Sweep spec JSON")->required();
  sweep->add_option("--out", out_path, "Results CSV (stdout when omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(in, config, stride, out);
    if (compress_cmd->parsed()) return cmd_compress(in, config, out_path, stride, seed, out);
    if (decompress_cmd->parsed()) return cmd_decompress(in, meta, out_path, out);
    if (simulate->parsed()) return cmd_simulate(config, out_path, seed, out);
    return cmd_sweep(config, out_path, out);
  } catch (const Error& e) {
    err << "fedcvlc: " << e.what() << '\n';
    return e.code() == ErrorCode::kInfeasible ? kExitInfeasible : kExitUsage;
  } catch (const std::exception& e) {
    err << "fedcvlc: internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fedcvlc::cli
