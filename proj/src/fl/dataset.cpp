#include "fedcvlc/fl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "fedcvlc/error.hpp"
#include "fedcvlc/rng.hpp"

namespace fedcvlc::fl {
namespace {

constexpr std::uint64_t kCenterStream = 0;
constexpr std::uint64_t kTestStream = 0xFFFFFFFFull;

void check(bool ok, const char* message) {
  if (!ok) throw Error(ErrorCode::kInvalidInput, message);
}

void check_partition(const PartitionSpec& p, int classes, int n_clients) {
  check(n_clients >= 1, "need at least one client");
  check(p.samples_per_client >= 1, "samples_per_client must be >= 1");
  if (!p.iid) {
    check(p.labels_per_client >= 1 && p.labels_per_client <= classes,
          "labels_per_client must be in [1, classes]");
  }
}

// First `m` labels of a seeded shuffle of [0, classes).
std::vector<int> label_subset(int classes, int m, std::mt19937_64& gen) {
  std::vector<int> labels(static_cast<std::size_t>(classes));
  std::iota(labels.begin(), labels.end(), 0);
  std::shuffle(labels.begin(), labels.end(), gen);
  labels.resize(static_cast<std::size_t>(m));
  std::sort(labels.begin(), labels.end());
  return labels;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read IDX file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

void Dataset::push_back(std::span<const double> features_row, int label) {
  if (features_row.size() != features) {
    throw Error(ErrorCode::kInvalidInput, "row has " + std::to_string(features_row.size()) +
                                              " features, dataset has " + std::to_string(features));
  }
  x.insert(x.end(), features_row.begin(), features_row.end());
  labels.push_back(label);
}

FederatedData generate_synthetic(const SyntheticSpec& spec, int n_clients, std::uint64_t seed) {
  check(spec.classes >= 2, "need at least two classes");
  check(spec.features >= 1, "need at least one feature");
  check(spec.modes_per_class >= 1, "modes_per_class must be >= 1");
  check(std::isfinite(spec.separation) && spec.separation >= 0.0, "separation must be >= 0");
  check(std::isfinite(spec.noise) && spec.noise >= 0.0, "noise must be >= 0");
  check(spec.test_samples >= 1, "test_samples must be >= 1");
  check_partition(spec.partition, spec.classes, n_clients);

  const auto f = static_cast<std::size_t>(spec.features);
  std::normal_distribution<double> normal(0.0, 1.0);

  // centers[c * modes + m] is a point at distance `separation` from 0.
  std::mt19937_64 center_gen(derive_key(seed, kCenterStream));
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(spec.classes * spec.modes_per_class));
  for (std::vector<double>& c : centers) {
    c.resize(f);
    double norm_sq = 0.0;
    for (double& v : c) {
      v = normal(center_gen);
      norm_sq += v * v;
    }
    const double scale = norm_sq > 0.0 ? spec.separation / std::sqrt(norm_sq) : 0.0;
    for (double& v : c) v *= scale;
  }

  std::vector<double> row(f);
  auto draw = [&](int label, std::mt19937_64& gen, Dataset& out) {
    const auto mode = std::uniform_int_distribution<int>(0, spec.modes_per_class - 1)(gen);
    const std::vector<double>& c = centers[static_cast<std::size_t>(label * spec.modes_per_class + mode)];
    for (std::size_t j = 0; j < f; ++j) row[j] = c[j] + spec.noise * normal(gen);
    out.push_back(row, label);
  };

  FederatedData data;
  data.classes = spec.classes;
  data.clients.resize(static_cast<std::size_t>(n_clients));
  std::uniform_int_distribution<int> any_label(0, spec.classes - 1);
  for (int i = 0; i < n_clients; ++i) {
    std::mt19937_64 gen(derive_key(seed, 1 + static_cast<std::uint64_t>(i)));
    Dataset& shard = data.clients[static_cast<std::size_t>(i)];
    shard.features = f;
    const PartitionSpec& p = spec.partition;
    if (p.iid) {
      for (int j = 0; j < p.samples_per_client; ++j) draw(any_label(gen), gen, shard);
    } else {
      // Round-robin over the subset so every chosen label appears.
      const std::vector<int> subset = label_subset(spec.classes, p.labels_per_client, gen);
      for (int j = 0; j < p.samples_per_client; ++j) {
        draw(subset[static_cast<std::size_t>(j) % subset.size()], gen, shard);
      }
    }
  }

  std::mt19937_64 test_gen(derive_key(seed, kTestStream));
  data.test.features = f;
  for (int j = 0; j < spec.test_samples; ++j) draw(any_label(test_gen), test_gen, data.test);
  return data;
}

Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const std::vector<std::uint8_t> img = read_file(images);
  const std::vector<std::uint8_t> lab = read_file(labels);
  if (img.size() < 16 || be32(img, 0) != 0x00000803u) {
    throw Error(ErrorCode::kIo, "not an IDX image file: " + images.string());
  }
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801u) {
    throw Error(ErrorCode::kIo, "not an IDX label file: " + labels.string());
  }
  const std::size_t count = be32(img, 4);
  const std::size_t pixels = std::size_t{be32(img, 8)} * be32(img, 12);
  if (be32(lab, 4) != count) throw Error(ErrorCode::kIo, "IDX image and label counts differ");
  if (img.size() != 16 + count * pixels || lab.size() != 8 + count) {
    throw Error(ErrorCode::kIo, "IDX file size does not match its header");
  }

  Dataset out;
  out.features = pixels;
  out.x.resize(count * pixels);
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] = img[16 + i] / 255.0;
  out.labels.assign(lab.begin() + 8, lab.end());
  return out;
}

FederatedData partition_dataset(const Dataset& train, Dataset test, int classes, int n_clients,
                                const PartitionSpec& spec, std::uint64_t seed) {
  check(classes >= 2, "need at least two classes");
  check_partition(spec, classes, n_clients);
  check(test.features == train.features, "train and test feature counts differ");
  std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int label = train.labels[i];
    check(label >= 0 && label < classes, "label out of range");
    by_label[static_cast<std::size_t>(label)].push_back(i);
  }
  for (int label : test.labels) check(label >= 0 && label < classes, "label out of range");

  FederatedData data;
  data.classes = classes;
  data.test = std::move(test);
  data.clients.resize(static_cast<std::size_t>(n_clients));
  for (int c = 0; c < n_clients; ++c) {
    std::mt19937_64 gen(derive_key(seed, 1 + static_cast<std::uint64_t>(c)));
    std::vector<std::size_t> pool;
    if (spec.iid) {
      pool.resize(train.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
    } else {
      for (int label : label_subset(classes, spec.labels_per_client, gen)) {
        const auto& ids = by_label[static_cast<std::size_t>(label)];
        pool.insert(pool.end(), ids.begin(), ids.end());
      }
    }
    check(!pool.empty(), "client label subset has no training samples");
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(spec.samples_per_client));
    for (std::size_t j = 0; j < take; ++j) {
      std::swap(pool[j], pool[std::uniform_int_distribution<std::size_t>(j, pool.size() - 1)(gen)]);
    }
    Dataset& shard = data.clients[static_cast<std::size_t>(c)];
    shard.features = train.features;
    for (std::size_t j = 0; j < take; ++j) shard.push_back(train.row(pool[j]), train.labels[pool[j]]);
  }
  return data;
}

}  // namespace fedcvlc::fl
