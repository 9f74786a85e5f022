#include "fedcvlc/fl/sweep.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "fedcvlc/error.hpp"
#include "fedcvlc/parallel.hpp"

namespace fedcvlc::fl {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::kInvalidInput, message); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

void SweepSpec::validate() const {
  base.validate();
  if (compressors.empty()) bad("sweep needs at least one compressor");
  if (seeds.empty()) bad("sweep needs at least one seed");
  if (target.accuracy.has_value() == target.oracle_fraction.has_value()) {
    bad("sweep target needs exactly one of 'accuracy' or 'oracle_fraction'");
  }
  const double t = target.accuracy ? *target.accuracy : *target.oracle_fraction;
  if (!(t > 0.0 && t <= 1.0)) bad("sweep target must be in (0, 1]");
}

std::optional<TargetHit> first_hit(const std::vector<RoundMetrics>& history, double target) {
  TargetHit hit;
  for (const RoundMetrics& m : history) {
    ++hit.rounds;
    hit.bytes += m.uplink_bytes_total;
    if (m.test_accuracy >= target) return hit;
  }
  return std::nullopt;
}

SweepSpec sweep_spec_from_json(const json& j) {
  if (!j.is_object()) bad("sweep spec must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "base" && key != "compressors" && key != "seeds" && key != "target") {
      bad("unknown key '" + key + "' in sweep spec");
    }
  }
  SweepSpec spec;
  spec.base = fl_config_from_json(j.value("base", json::object()));
  if (!j.contains("compressors") || !j["compressors"].is_array()) bad("sweep needs a 'compressors' array");
  for (const json& c : j["compressors"]) spec.compressors.push_back(compressor_from_json(c));
  if (!j.contains("seeds") || !j["seeds"].is_array()) bad("sweep needs a 'seeds' array");
  for (const json& s : j["seeds"]) {
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
      bad("seeds must be non-negative integers, got " + s.dump());
    }
    spec.seeds.push_back(s.get<std::uint64_t>());
  }
  if (!j.contains("target") || !j["target"].is_object()) bad("sweep needs a 'target' object");
  const json& t = j["target"];
  for (const auto& [key, value] : t.items()) {
    if (!value.is_number()) bad("target '" + key + "' must be a number");
    if (key == "accuracy") {
      spec.target.accuracy = value.get<double>();
    } else if (key == "oracle_fraction") {
      spec.target.oracle_fraction = value.get<double>();
    } else {
      bad("unknown key '" + key + "' in target");
    }
  }
  spec.validate();
  return spec;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::size_t n_seeds = spec.seeds.size();
  const std::size_t n_comp = spec.compressors.size();

  auto config_for = [&](std::size_t s, const CompressorSpec& c) {
    FLConfig cfg = spec.base;
    cfg.seed = spec.seeds[s];
    cfg.compressor = c;
    return cfg;
  };

  // Data and starting weights depend only on the seed.
  std::vector<std::optional<FederatedSetup>> setups(n_seeds);
  parallel_for(n_seeds, [&](std::size_t s) {
    FLConfig cfg = spec.base;
    cfg.seed = spec.seeds[s];
    setups[s] = prepare(cfg);
  });

  std::vector<double> targets(n_seeds, spec.target.accuracy.value_or(kNaN));
  if (spec.target.oracle_fraction) {
    parallel_for(n_seeds, [&](std::size_t s) {
      const std::vector<RoundMetrics> oracle =
          run_federated(config_for(s, CompressorSpec::parse("none")), *setups[s]);
      targets[s] = *spec.target.oracle_fraction * oracle.back().test_accuracy;
    });
  }

  std::vector<SweepRow> rows(n_comp * n_seeds);
  parallel_for(rows.size(), [&](std::size_t job) {
    const std::size_t c = job / n_seeds;
    const std::size_t s = job % n_seeds;
    const std::vector<RoundMetrics> history = run_federated(config_for(s, spec.compressors[c]), *setups[s]);
    SweepRow& row = rows[job];
    row.compressor = spec.compressors[c].name();
    row.seed = spec.seeds[s];
    row.target_accuracy = targets[s];
    row.final_accuracy = history.back().test_accuracy;
    if (const auto hit = first_hit(history, targets[s])) {
      row.rounds_to_target = hit->rounds;
      row.bytes_to_target = static_cast<double>(hit->bytes);
    }
  });

  for (std::size_t c = 0; c < n_comp; ++c) {
    SweepRow mean;
    mean.compressor = spec.compressors[c].name();
    double target = 0.0, final_acc = 0.0, rounds = 0.0, bytes = 0.0;
    int reached = 0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const SweepRow& row = rows[c * n_seeds + s];
      target += row.target_accuracy;
      final_acc += row.final_accuracy;
      if (row.rounds_to_target) {
        rounds += *row.rounds_to_target;
        bytes += *row.bytes_to_target;
        ++reached;
      }
    }
    mean.target_accuracy = target / static_cast<double>(n_seeds);
    mean.final_accuracy = final_acc / static_cast<double>(n_seeds);
    if (reached > 0) {
      mean.rounds_to_target = rounds / reached;
      mean.bytes_to_target = bytes / reached;
    }
    rows.push_back(mean);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "compressor,seed,target_accuracy,rounds_to_target,bytes_to_target,final_accuracy\n";
  for (const SweepRow& r : rows) {
    out << r.compressor << ',' << (r.seed ? std::to_string(*r.seed) : "mean") << ','
        << format_double(r.target_accuracy) << ','
        << (r.rounds_to_target ? format_double(*r.rounds_to_target) : "unreached") << ','
        << (r.bytes_to_target ? format_double(*r.bytes_to_target) : "unreached") << ','
        << format_double(r.final_accuracy) << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& history) {
  out << "round,test_accuracy,train_loss,uplink_bytes_total,mean_gamma,mean_measured_error\n";
  for (const RoundMetrics& m : history) {
    out << m.round << ',' << format_double(m.test_accuracy) << ',' << format_double(m.train_loss) << ','
        << m.uplink_bytes_total << ',' << format_double(m.mean_gamma) << ','
        << format_double(m.mean_measured_error) << '\n';
  }
}

}  // namespace fedcvlc::fl
