#include "fedcvlc/fl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "fedcvlc/error.hpp"

namespace fedcvlc::fl {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::kInvalidInput, message); }

void only_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) bad(std::string(where) + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) bad("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get(const json& j, const char* key, T* out) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("bad value for '") + key + "': " + e.what());
  }
}

void get_path(const json& j, const char* key, std::filesystem::path* out) {
  std::string s;
  get(j, key, &s);
  if (!s.empty()) *out = s;
}

}  // namespace

std::string CompressorSpec::name() const {
  switch (kind) {
    case CompressorKind::kNone: return "none";
    case CompressorKind::kFedCvlc: return "fed_cvlc";
    case CompressorKind::kTopk: return "topk";
    case CompressorKind::kFixed: return "fixed{" + std::to_string(bits) + "}";
  }
  return "?";
}

CompressorSpec CompressorSpec::parse(std::string_view name) {
  CompressorSpec spec;
  if (name == "none") {
    spec.kind = CompressorKind::kNone;
  } else if (name == "fed_cvlc") {
    spec.kind = CompressorKind::kFedCvlc;
  } else if (name == "topk") {
    spec.kind = CompressorKind::kTopk;
    spec.bits = kMaxCodeBits;
  } else if (name.starts_with("fixed")) {
    std::string_view digits = name.substr(5);
    if (digits.starts_with('{') && digits.ends_with('}')) digits = digits.substr(1, digits.size() - 2);
    int bits = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bits);
    if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty()) {
      bad("bad fixed compressor '" + std::string(name) + "'");
    }
    if (bits < kMinCodeBits || bits > kMaxCodeBits) bad("fixed code length must be in [1, 32]");
    spec.kind = CompressorKind::kFixed;
    spec.bits = bits;
  } else {
    bad("unknown compressor '" + std::string(name) + "'");
  }
  return spec;
}

void FLConfig::validate() const {
  if (n_clients < 1) bad("n_clients must be >= 1");
  if (clients_per_round < 1 || clients_per_round > n_clients) {
    bad("clients_per_round must be in [1, n_clients]");
  }
  if (train.local_iters < 1) bad("local_iters must be >= 1");
  if (train.batch_size < 1) bad("batch_size must be >= 1");
  if (!std::isfinite(train.learning_rate) || train.learning_rate < 0) bad("learning_rate must be >= 0");
  if (rounds < 1) bad("rounds must be >= 1");
  if (compressor.k_stride < 1) bad("k_stride must be >= 1");
  if (packets < 1) bad("packets must be >= 1");
  if (packet_bits <= header_bits) bad("packet_bits must exceed header_bits");
}

BudgetConfig FLConfig::budget(std::int64_t dimension) const {
  return BudgetConfig::make(dimension, packet_bits, packets, header_bits);
}

CompressorSpec compressor_from_json(const json& j) {
  if (j.is_string()) return CompressorSpec::parse(j.get<std::string>());
  only_keys(j, {"kind", "quantizer", "error_feedback", "k_stride"}, "compressor");
  std::string kind = "fed_cvlc";
  get(j, "kind", &kind);
  CompressorSpec spec = CompressorSpec::parse(kind);
  std::string quantizer = to_string(spec.quantizer);
  get(j, "quantizer", &quantizer);
  spec.quantizer = parse_quantizer_kind(quantizer);
  get(j, "error_feedback", &spec.error_feedback);
  get(j, "k_stride", &spec.k_stride);
  if (spec.k_stride < 1) bad("k_stride must be >= 1");
  return spec;
}

FLConfig fl_config_from_json(const json& j) {
  FLConfig cfg;
  only_keys(j,
            {"n_clients", "clients_per_round", "local_iters", "batch_size", "learning_rate", "rounds",
             "seed", "data", "model", "compressor", "budget"},
            "config");
  get(j, "n_clients", &cfg.n_clients);
  get(j, "clients_per_round", &cfg.clients_per_round);
  get(j, "local_iters", &cfg.train.local_iters);
  get(j, "batch_size", &cfg.train.batch_size);
  get(j, "learning_rate", &cfg.train.learning_rate);
  get(j, "rounds", &cfg.rounds);
  get(j, "seed", &cfg.seed);

  if (j.contains("data")) {
    const json& d = j["data"];
    only_keys(d,
              {"source", "classes", "features", "modes_per_class", "separation", "noise", "test_samples",
               "samples_per_client", "iid", "labels_per_client", "train_images", "train_labels",
               "test_images", "test_labels"},
              "data");
    std::string source = "synthetic";
    get(d, "source", &source);
    SyntheticSpec& s = cfg.data.synthetic;
    if (source == "synthetic") {
      cfg.data.source = DataSpec::Source::kSynthetic;
      get(d, "classes", &s.classes);
    } else if (source == "idx") {
      cfg.data.source = DataSpec::Source::kIdx;
      get(d, "classes", &cfg.data.idx_classes);
      get_path(d, "train_images", &cfg.data.train_images);
      get_path(d, "train_labels", &cfg.data.train_labels);
      get_path(d, "test_images", &cfg.data.test_images);
      get_path(d, "test_labels", &cfg.data.test_labels);
    } else {
      bad("unknown data source '" + source + "'");
    }
    get(d, "features", &s.features);
    get(d, "modes_per_class", &s.modes_per_class);
    get(d, "separation", &s.separation);
    get(d, "noise", &s.noise);
    get(d, "test_samples", &s.test_samples);
    get(d, "samples_per_client", &s.partition.samples_per_client);
    get(d, "iid", &s.partition.iid);
    get(d, "labels_per_client", &s.partition.labels_per_client);
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    only_keys(m, {"kind", "hidden"}, "model");
    std::string kind = to_string(cfg.model.kind);
    get(m, "kind", &kind);
    cfg.model.kind = parse_model_kind(kind);
    get(m, "hidden", &cfg.model.hidden);
  }
  if (j.contains("compressor")) cfg.compressor = compressor_from_json(j["compressor"]);
  if (j.contains("budget")) {
    const json& b = j["budget"];
    only_keys(b, {"packet_bits", "packets", "header_bits"}, "budget");
    get(b, "packet_bits", &cfg.packet_bits);
    get(b, "packets", &cfg.packets);
    get(b, "header_bits", &cfg.header_bits);
  }
  cfg.validate();
  return cfg;
}

json to_json(const CompressorSpec& spec) {
  return {{"kind", spec.name()},
          {"quantizer", to_string(spec.quantizer)},
          {"error_feedback", spec.error_feedback},
          {"k_stride", spec.k_stride}};
}

json to_json(const FLConfig& cfg) {
  const SyntheticSpec& s = cfg.data.synthetic;
  json data = {{"features", s.features},
               {"modes_per_class", s.modes_per_class},
               {"separation", s.separation},
               {"noise", s.noise},
               {"test_samples", s.test_samples},
               {"samples_per_client", s.partition.samples_per_client},
               {"iid", s.partition.iid},
               {"labels_per_client", s.partition.labels_per_client}};
  if (cfg.data.source == DataSpec::Source::kSynthetic) {
    data["source"] = "synthetic";
    data["classes"] = s.classes;
  } else {
    data["source"] = "idx";
    data["classes"] = cfg.data.idx_classes;
    data["train_images"] = cfg.data.train_images.string();
    data["train_labels"] = cfg.data.train_labels.string();
    data["test_images"] = cfg.data.test_images.string();
    data["test_labels"] = cfg.data.test_labels.string();
  }
  return {{"n_clients", cfg.n_clients},
          {"clients_per_round", cfg.clients_per_round},
          {"local_iters", cfg.train.local_iters},
          {"batch_size", cfg.train.batch_size},
          {"learning_rate", cfg.train.learning_rate},
          {"rounds", cfg.rounds},
          {"seed", cfg.seed},
          {"data", data},
          {"model", {{"kind", to_string(cfg.model.kind)}, {"hidden", cfg.model.hidden}}},
          {"compressor", to_json(cfg.compressor)},
          {"budget",
           {{"packet_bits", cfg.packet_bits}, {"packets", cfg.packets}, {"header_bits", cfg.header_bits}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace fedcvlc::fl
