#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fedcvlc/codelen_optimizer.hpp"
#include "fedcvlc/fl/dataset.hpp"
#include "fedcvlc/fl/model.hpp"
#include "fedcvlc/quantizer.hpp"
#include "json.hpp"

namespace fedcvlc::fl {

enum class CompressorKind { kNone, kFedCvlc, kTopk, kFixed };

struct CompressorSpec {
  CompressorKind kind = CompressorKind::kFedCvlc;
  int bits = 6;  // kFixed only
  QuantizerKind quantizer = QuantizerKind::kPq;
  bool error_feedback = false;
  std::int64_t k_stride = 1;

  // "none", "fed_cvlc", "topk" or "fixed{y}".
  std::string name() const;
  static CompressorSpec parse(std::string_view name);
};

struct DataSpec {
  enum class Source { kSynthetic, kIdx };
  Source source = Source::kSynthetic;
  SyntheticSpec synthetic;
  // kIdx only; the partition comes from synthetic.partition.
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  int idx_classes = 10;
};

struct FLConfig {
  int n_clients = 20;
  int clients_per_round = 5;
  LocalTrainConfig train;
  int rounds = 300;
  std::uint64_t seed = 1;
  DataSpec data;
  ModelSpec model;
  CompressorSpec compressor;
  std::int64_t packet_bits = 2400;
  std::int64_t packets = 10;
  std::int64_t header_bits = kHeaderBits;

  // Throws InvalidInput.
  void validate() const;
  BudgetConfig budget(std::int64_t dimension) const;
};

// Missing keys keep their defaults; unknown keys and bad values throw
// InvalidInput. The compressor may be a name string or an object.
FLConfig fl_config_from_json(const nlohmann::json& j);
CompressorSpec compressor_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FLConfig& cfg);
nlohmann::json to_json(const CompressorSpec& spec);

// Throws Io when the file cannot be read or parsed.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fedcvlc::fl
