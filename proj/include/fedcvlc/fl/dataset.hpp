#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fedcvlc::fl {

// Row-major feature matrix with integer labels in [0, classes).
struct Dataset {
  std::size_t features = 0;
  std::vector<double> x;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * features, features);
  }
  void push_back(std::span<const double> features_row, int label);
};

// How client shards draw their labels.
struct PartitionSpec {
  int samples_per_client = 200;
  bool iid = true;
  int labels_per_client = 2;  // non-IID only: distinct labels per client
};

// Gaussian mixture: every class owns `modes_per_class` centers drawn with
// norm `separation`, samples add isotropic noise of std `noise`.
struct SyntheticSpec {
  int classes = 10;
  int features = 32;
  int modes_per_class = 2;
  double separation = 3.0;
  double noise = 1.0;
  int test_samples = 2000;
  PartitionSpec partition;
};

struct FederatedData {
  int classes = 0;
  std::vector<Dataset> clients;
  Dataset test;
};

FederatedData generate_synthetic(const SyntheticSpec& spec, int n_clients, std::uint64_t seed);

// IDX (unsigned byte) images and labels; pixels are scaled to [0, 1].
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Client shards drawn from a pooled training set, without replacement within
// a client. Non-IID clients only see their label subset.
FederatedData partition_dataset(const Dataset& train, Dataset test, int classes, int n_clients,
                                const PartitionSpec& spec, std::uint64_t seed);

}  // namespace fedcvlc::fl
