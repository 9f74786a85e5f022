#include "fedcvlc/fl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedcvlc/error.hpp"

namespace fedcvlc::fl {
namespace {

// In-place softmax; returns log(sum(exp(scores))) for the loss.
double softmax(double* scores, std::size_t n) {
  const double top = *std::max_element(scores, scores + n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = std::exp(scores[i] - top);
    sum += scores[i];
  }
  for (std::size_t i = 0; i < n; ++i) scores[i] /= sum;
  return top + std::log(sum);
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::kLogistic ? "logistic" : "mlp"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw Error(ErrorCode::kInvalidInput, "unknown model '" + std::string(name) + "'");
}

Model::Model(const ModelSpec& spec, std::size_t features, int classes)
    : spec_(spec), features_(features), classes_(static_cast<std::size_t>(classes)), hidden_(0) {
  if (features == 0 || classes < 2) throw Error(ErrorCode::kInvalidInput, "model needs features and >= 2 classes");
  if (spec.kind == ModelKind::kLogistic) {
    params_ = classes_ * (features_ + 1);
  } else {
    if (spec.hidden < 1) throw Error(ErrorCode::kInvalidInput, "mlp hidden width must be >= 1");
    hidden_ = static_cast<std::size_t>(spec.hidden);
    params_ = hidden_ * (features_ + 1) + classes_ * (hidden_ + 1);
  }
}

std::vector<double> Model::initial_parameters(std::uint64_t seed) const {
  std::vector<double> w(params_, 0.0);
  if (spec_.kind == ModelKind::kLogistic) return w;
  std::mt19937_64 gen(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(features_ + hidden_));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_ + classes_));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  double* p = w.data();
  for (std::size_t i = 0; i < hidden_ * features_; ++i) *p++ = u1(gen);
  p += hidden_;
  for (std::size_t i = 0; i < classes_ * hidden_; ++i) *p++ = u2(gen);
  return w;
}

void Model::forward(std::span<const double> w, std::span<const double> x, double* hidden,
                    double* scores) const {
  const double* p = w.data();
  std::span<const double> in = x;
  std::size_t in_dim = features_;
  if (spec_.kind == ModelKind::kMlp) {
    const double* b1 = p + hidden_ * features_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* row = p + h * features_;
      double a = b1[h];
      for (std::size_t j = 0; j < features_; ++j) a += row[j] * x[j];
      hidden[h] = std::tanh(a);
    }
    p = b1 + hidden_;
    in = std::span<const double>(hidden, hidden_);
    in_dim = hidden_;
  }
  const double* bias = p + classes_ * in_dim;
  for (std::size_t c = 0; c < classes_; ++c) {
    const double* row = p + c * in_dim;
    double s = bias[c];
    for (std::size_t j = 0; j < in_dim; ++j) s += row[j] * in[j];
    scores[c] = s;
  }
}

double Model::loss(std::span<const double> w, const Dataset& data, std::span<const std::uint32_t> rows,
                   std::span<double> grad) const {
  if (w.size() != params_) throw Error(ErrorCode::kInvalidInput, "parameter vector has the wrong size");
  if (data.features != features_) throw Error(ErrorCode::kInvalidInput, "dataset feature count mismatch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_) throw Error(ErrorCode::kInvalidInput, "gradient has the wrong size");
  const std::size_t n = rows.empty() ? data.size() : rows.size();
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "loss over an empty dataset");
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double> hidden(hidden_), scores(classes_), dhidden(hidden_);
  const bool mlp = spec_.kind == ModelKind::kMlp;
  const std::size_t out_offset = mlp ? hidden_ * (features_ + 1) : 0;
  const std::size_t in_dim = mlp ? hidden_ : features_;
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = rows.empty() ? t : rows[t];
    const std::span<const double> x = data.row(i);
    const auto label = static_cast<std::size_t>(data.labels[i]);
    forward(w, x, hidden.data(), scores.data());
    const double raw = scores[label];
    total += softmax(scores.data(), classes_) - raw;
    if (!want_grad) continue;

    scores[label] -= 1.0;  // dL/dscores
    const std::span<const double> in = mlp ? std::span<const double>(hidden) : x;
    double* g_out = grad.data() + out_offset;
    double* g_bias = g_out + classes_ * in_dim;
    for (std::size_t c = 0; c < classes_; ++c) {
      double* row = g_out + c * in_dim;
      for (std::size_t j = 0; j < in_dim; ++j) row[j] += scores[c] * in[j];
      g_bias[c] += scores[c];
    }
    if (!mlp) continue;
    const double* w_out = w.data() + out_offset;
    for (std::size_t h = 0; h < hidden_; ++h) {
      double s = 0.0;
      for (std::size_t c = 0; c < classes_; ++c) s += w_out[c * hidden_ + h] * scores[c];
      dhidden[h] = s * (1.0 - hidden[h] * hidden[h]);
    }
    double* g_b1 = grad.data() + hidden_ * features_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      double* row = grad.data() + h * features_;
      for (std::size_t j = 0; j < features_; ++j) row[j] += dhidden[h] * x[j];
      g_b1[h] += dhidden[h];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (double& g : grad) g *= inv;
  }
  return total * inv;
}

double Model::accuracy(std::span<const double> w, const Dataset& data) const {
  if (data.size() == 0) throw Error(ErrorCode::kInvalidInput, "accuracy over an empty dataset");
  std::vector<double> hidden(hidden_), scores(classes_);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(w, data.row(i), hidden.data(), scores.data());
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

UpdateVector local_train(const Model& model, std::span<const double> w0, const Dataset& data,
                         const LocalTrainConfig& cfg, std::uint64_t seed) {
  if (data.size() == 0) throw Error(ErrorCode::kInvalidInput, "client dataset is empty");
  if (cfg.local_iters < 1) throw Error(ErrorCode::kInvalidInput, "local_iters must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorCode::kInvalidInput, "batch_size must be >= 1");
  if (!std::isfinite(cfg.learning_rate)) throw Error(ErrorCode::kInvalidInput, "learning rate must be finite");

  std::vector<double> w(w0.begin(), w0.end());
  std::vector<double> grad(w.size());
  std::vector<std::uint32_t> order(data.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t batch = std::min(order.size(), static_cast<std::size_t>(cfg.batch_size));
  std::mt19937_64 gen(seed);
  for (int step = 0; step < cfg.local_iters; ++step) {
    if (batch < order.size()) {
      for (std::size_t j = 0; j < batch; ++j) {
        std::swap(order[j], order[std::uniform_int_distribution<std::size_t>(j, order.size() - 1)(gen)]);
      }
    }
    model.loss(w, data, std::span<const std::uint32_t>(order).first(batch), grad);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * grad[j];
  }
  std::vector<double> u(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) u[j] = w0[j] - w[j];
  return UpdateVector(std::move(u));
}

std::vector<double> aggregate(std::span<const double> w, std::span<const UpdateVector> updates) {
  if (updates.empty()) throw Error(ErrorCode::kInvalidInput, "aggregate needs at least one update");
  std::vector<double> sum(w.size(), 0.0);
  for (const UpdateVector& u : updates) {
    if (u.dimension() != w.size()) throw Error(ErrorCode::kInvalidInput, "update dimension mismatch");
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += u[j];
  }
  const double n = static_cast<double>(updates.size());
  std::vector<double> out(w.begin(), w.end());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= sum[j] / n;
  return out;
}

}  // namespace fedcvlc::fl
