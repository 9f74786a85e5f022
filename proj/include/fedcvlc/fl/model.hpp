#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedcvlc/fl/dataset.hpp"
#include "fedcvlc/update_model.hpp"

namespace fedcvlc::fl {

enum class ModelKind { kLogistic, kMlp };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  int hidden = 48;  // mlp only
};

// Softmax classifier over a flat parameter vector.
//   logistic: W (classes x features), b (classes)
//   mlp:      W1 (hidden x features), b1 (hidden), tanh,
//             W2 (classes x hidden), b2 (classes)
class Model {
 public:
  Model(const ModelSpec& spec, std::size_t features, int classes);

  std::size_t parameter_count() const noexcept { return params_; }
  const ModelSpec& spec() const noexcept { return spec_; }

  // Logistic starts at zero; the MLP gets uniform Glorot weights, zero biases.
  std::vector<double> initial_parameters(std::uint64_t seed) const;

  // Mean cross-entropy over `rows` of data; writes its gradient to `grad`
  // when non-empty. Empty `rows` means the whole dataset.
  double loss(std::span<const double> w, const Dataset& data,
              std::span<const std::uint32_t> rows = {}, std::span<double> grad = {}) const;

  double accuracy(std::span<const double> w, const Dataset& data) const;

 private:
  // Class scores for one sample; hidden activations go to `hidden`.
  void forward(std::span<const double> w, std::span<const double> x, double* hidden,
               double* scores) const;

  ModelSpec spec_;
  std::size_t features_;
  std::size_t classes_;
  std::size_t hidden_;
  std::size_t params_;
};

struct LocalTrainConfig {
  int local_iters = 5;  // E mini-batch SGD steps
  int batch_size = 32;  // >= data size means full batch
  double learning_rate = 0.1;
};

// U = w0 - w_E after E mini-batch SGD steps starting from w0. Batches are
// drawn without replacement from a stream keyed by `seed`.
UpdateVector local_train(const Model& model, std::span<const double> w0, const Dataset& data,
                         const LocalTrainConfig& cfg, std::uint64_t seed);

// w - (1/n) * sum(updates), summed in the given order.
std::vector<double> aggregate(std::span<const double> w, std::span<const UpdateVector> updates);

}  // namespace fedcvlc::fl
