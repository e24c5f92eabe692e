#include "peekaboom/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <string>

#include "peekaboom/error.hpp"
#include "peekaboom/random.hpp"

namespace peekaboom {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs <= 0 || batch_size <= 0 || hidden <= 0) {
    fail(Errc::invalid_argument, "train config values must be positive");
  }
}

void SmoothGradParams::validate() const {
  if (samples < 1) fail(Errc::invalid_argument, "smoothgrad needs at least one sample");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    fail(Errc::invalid_argument, "smoothgrad sigma must be a nonnegative real");
  }
}

int argmax(std::span<const double> scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Classifier::Classifier(std::size_t input_dim, std::size_t hidden, std::size_t classes)
    : input_dim_(input_dim),
      hidden_(hidden),
      classes_(classes),
      w1_(hidden * input_dim, 0.0),
      b1_(hidden, 0.0),
      w2_(classes * hidden, 0.0),
      b2_(classes, 0.0) {
  if (input_dim == 0 || hidden == 0 || classes == 0) {
    fail(Errc::invalid_argument, "classifier dimensions must be positive");
  }
}

Classifier Classifier::random_init(std::size_t input_dim, std::size_t hidden,
                                   std::size_t classes, std::uint64_t seed) {
  Classifier model(input_dim, hidden, classes);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : model.w1_) w = s1 * standard_normal(rng);
  for (double& w : model.w2_) w = s2 * standard_normal(rng);
  return model;
}

void Classifier::check_input(std::span<const double> input) const {
  if (input.size() != input_dim_) {
    fail(Errc::dimension_mismatch, "classifier expects " + std::to_string(input_dim_) +
                                       " inputs, got " + std::to_string(input.size()));
  }
}

void Classifier::hidden_activations(std::span<const double> input,
                                    std::vector<double>& out) const {
  out.resize(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    const double* row = &w1_[j * input_dim_];
    double z = b1_[j];
    for (std::size_t i = 0; i < input_dim_; ++i) z += row[i] * input[i];
    out[j] = std::tanh(z);
  }
}

std::vector<double> Classifier::predict(std::span<const double> input) const {
  check_input(input);
  std::vector<double> h;
  hidden_activations(input, h);
  std::vector<double> logits(b2_);
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* row = &w2_[k * hidden_];
    for (std::size_t j = 0; j < hidden_; ++j) logits[k] += row[j] * h[j];
  }
  return logits;
}

int Classifier::predict_class(std::span<const double> input) const {
  return argmax(predict(input));
}

std::vector<double> Classifier::input_gradient(std::span<const double> input,
                                               int class_index) const {
  check_input(input);
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= classes_) {
    fail(Errc::out_of_range, "class index " + std::to_string(class_index) + " out of range");
  }
  std::vector<double> h;
  hidden_activations(input, h);
  std::vector<double> grad(input_dim_, 0.0);
  const double* out_row = &w2_[static_cast<std::size_t>(class_index) * hidden_];
  for (std::size_t j = 0; j < hidden_; ++j) {
    const double dz = out_row[j] * (1.0 - h[j] * h[j]);
    if (dz == 0.0) continue;
    const double* row = &w1_[j * input_dim_];
    for (std::size_t i = 0; i < input_dim_; ++i) grad[i] += dz * row[i];
  }
  return grad;
}

bool Classifier::parameters_finite() const {
  for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) {
    for (double x : *v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void Classifier::validate() const {
  if (w1_.size() != hidden_ * input_dim_ || b1_.size() != hidden_ ||
      w2_.size() != classes_ * hidden_ || b2_.size() != classes_) {
    fail(Errc::dimension_mismatch, "classifier parameter shapes inconsistent");
  }
  if (!parameters_finite()) fail(Errc::non_finite, "classifier has a non-finite parameter");
}

// Holds the scratch buffers for one training run.
struct ClassifierTrainer {
  Classifier& m;
  std::vector<double> gw1, gb1, gw2, gb2, h, logits, dlogits, dz;

  explicit ClassifierTrainer(Classifier& model)
      : m(model),
        gw1(model.w1_.size()),
        gb1(model.b1_.size()),
        gw2(model.w2_.size()),
        gb2(model.b2_.size()) {}

  void zero() {
    std::fill(gw1.begin(), gw1.end(), 0.0);
    std::fill(gb1.begin(), gb1.end(), 0.0);
    std::fill(gw2.begin(), gw2.end(), 0.0);
    std::fill(gb2.begin(), gb2.end(), 0.0);
  }

  // Accumulates gradients of the cross-entropy; returns the sample loss.
  double accumulate(std::span<const double> x, int label) {
    const std::size_t H = m.hidden_, C = m.classes_, D = m.input_dim_;
    m.hidden_activations(x, h);
    logits.assign(m.b2_.begin(), m.b2_.end());
    for (std::size_t k = 0; k < C; ++k) {
      for (std::size_t j = 0; j < H; ++j) logits[k] += m.w2_[k * H + j] * h[j];
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    dlogits.resize(C);
    for (std::size_t k = 0; k < C; ++k) {
      dlogits[k] = std::exp(logits[k] - peak);
      norm += dlogits[k];
    }
    for (auto& p : dlogits) p /= norm;
    const double loss = -(logits[label] - peak - std::log(norm));
    dlogits[label] -= 1.0;

    dz.assign(H, 0.0);
    for (std::size_t k = 0; k < C; ++k) {
      gb2[k] += dlogits[k];
      for (std::size_t j = 0; j < H; ++j) {
        gw2[k * H + j] += dlogits[k] * h[j];
        dz[j] += m.w2_[k * H + j] * dlogits[k];
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double g = dz[j] * (1.0 - h[j] * h[j]);
      gb1[j] += g;
      if (g == 0.0) continue;
      double* row = &gw1[j * D];
      for (std::size_t i = 0; i < D; ++i) row[i] += g * x[i];
    }
    return loss;
  }

  void step(double lr, std::size_t batch) {
    const double scale = lr / static_cast<double>(batch);
    auto apply = [scale](std::vector<double>& w, const std::vector<double>& g) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * g[i];
    };
    apply(m.w1_, gw1);
    apply(m.b1_, gb1);
    apply(m.w2_, gw2);
    apply(m.b2_, gb2);
  }
};

TrainReport train(std::span<const DatasetItem> data, int class_count, const TrainConfig& config) {
  config.validate();
  if (data.empty()) fail(Errc::invalid_argument, "training set is empty");
  if (class_count <= 0) fail(Errc::invalid_argument, "class count must be positive");
  const std::size_t dim = data.front().image.value_count();
  for (const auto& item : data) {
    if (item.label < 0 || item.label >= class_count) {
      fail(Errc::out_of_range, "label " + std::to_string(item.label) + " of '" + item.id +
                                   "' outside [0, " + std::to_string(class_count) + ")");
    }
    if (item.image.value_count() != dim) {
      fail(Errc::dimension_mismatch, "training image '" + item.id + "' has a different size");
    }
  }

  Rng rng(config.seed);
  TrainReport report;
  report.model = Classifier::random_init(dim, static_cast<std::size_t>(config.hidden),
                                         static_cast<std::size_t>(class_count), rng());
  ClassifierTrainer trainer(report.model);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      trainer.zero();
      for (std::size_t b = start; b < end; ++b) {
        const auto& item = data[order[b]];
        epoch_loss += trainer.accumulate(item.image.values, item.label);
      }
      if (!std::isfinite(epoch_loss)) {
        fail(Errc::training_diverged,
             "training loss became non-finite in epoch " + std::to_string(epoch));
      }
      trainer.step(config.learning_rate, end - start);
      if (!report.model.parameters_finite()) {
        fail(Errc::training_diverged,
             "parameters became non-finite in epoch " + std::to_string(epoch));
      }
    }
    report.final_loss = epoch_loss / static_cast<double>(data.size());
  }
  report.model.validate();
  report.train_accuracy = accuracy(report.model, data);
  return report;
}

double accuracy(const Classifier& model, std::span<const DatasetItem> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& item : data) {
    if (model.predict_class(item.image.values) == item.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<double> smoothgrad(const Classifier& model, std::span<const double> input,
                               int class_index, const SmoothGradParams& params) {
  params.validate();
  if (params.sigma == 0.0) return model.input_gradient(input, class_index);

  const auto [lo, hi] = std::minmax_element(input.begin(), input.end());
  const double range = input.empty() || *hi == *lo ? 1.0 : *hi - *lo;
  const double stddev = params.sigma * range;
  Rng rng(params.seed);
  std::vector<double> noisy(input.begin(), input.end());
  std::vector<double> mean(input.size(), 0.0);
  for (int s = 0; s < params.samples; ++s) {
    for (std::size_t i = 0; i < input.size(); ++i) {
      noisy[i] = input[i] + stddev * standard_normal(rng);
    }
    const auto g = model.input_gradient(noisy, class_index);
    for (std::size_t i = 0; i < g.size(); ++i) mean[i] += g[i];
  }
  for (double& m : mean) m /= static_cast<double>(params.samples);
  return mean;
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
  json doc{{"format", "peekaboom-mlp-1"},
           {"input_dim", model.input_dim()},
           {"hidden", model.hidden_units()},
           {"classes", model.class_count()},
           {"w1", model.w1()},
           {"b1", model.b1()},
           {"w2", model.w2()},
           {"b2", model.b2()}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << doc.dump() << "\n";
}

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "peekaboom-mlp-1") fail(Errc::schema, "unknown model format");
    Classifier model(doc.at("input_dim").get<std::size_t>(), doc.at("hidden").get<std::size_t>(),
                     doc.at("classes").get<std::size_t>());
    model.w1() = doc.at("w1").get<std::vector<double>>();
    model.b1() = doc.at("b1").get<std::vector<double>>();
    model.w2() = doc.at("w2").get<std::vector<double>>();
    model.b2() = doc.at("b2").get<std::vector<double>>();
    model.validate();
    return model;
  } catch (const json::exception& e) {
    fail(Errc::schema, "malformed model file " + path.string() + ": " + e.what());
  }
}

std::vector<std::vector<double>> BuiltinImageClassifier::classify(
    std::span<const ImageTensor> images) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(model_.predict(img.values));
  return out;
}

}  // namespace peekaboom
