#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "peekaboom/dataset.hpp"
#include "peekaboom/image.hpp"

namespace peekaboom {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 40;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int hidden = 32;

  void validate() const;
};

struct SmoothGradParams {
  int samples = 25;
  // Noise standard deviation as a fraction of the input's value range.
  double sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// One hidden tanh layer: logits = W2 * tanh(W1 * x + b1) + b2.
class Classifier {
 public:
  Classifier() = default;
  // All parameters zero.
  Classifier(std::size_t input_dim, std::size_t hidden, std::size_t classes);

  static Classifier random_init(std::size_t input_dim, std::size_t hidden,
                                std::size_t classes, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_units() const { return hidden_; }
  std::size_t class_count() const { return classes_; }

  std::vector<double> predict(std::span<const double> input) const;
  std::vector<double> predict(const ImageTensor& image) const { return predict(image.values); }
  int predict_class(std::span<const double> input) const;

  // d logit[class_index] / d input, by backpropagation.
  std::vector<double> input_gradient(std::span<const double> input, int class_index) const;

  // Row-major weights: w1 is hidden x input_dim, w2 is classes x hidden.
  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& w2() const { return w2_; }
  const std::vector<double>& b2() const { return b2_; }

  bool parameters_finite() const;
  void validate() const;
  bool operator==(const Classifier&) const = default;

 private:
  friend struct ClassifierTrainer;

  void hidden_activations(std::span<const double> input, std::vector<double>& out) const;
  void check_input(std::span<const double> input) const;

  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> w1_, b1_, w2_, b2_;
};

struct TrainReport {
  Classifier model;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

// Mini-batch gradient descent on softmax cross-entropy. Deterministic given
// config.seed. Throws training_diverged when the loss becomes non-finite.
TrainReport train(std::span<const DatasetItem> data, int class_count, const TrainConfig& config);

double accuracy(const Classifier& model, std::span<const DatasetItem> data);

// Mean of input gradients at input + noise_i, noise_i ~ N(0, (sigma*range)^2)
// where range = max(input) - min(input) (1.0 for constant inputs). Sample i
// draws input_dim standard normals, in order, from an mt19937_64 seeded with
// params.seed and continued across samples.
std::vector<double> smoothgrad(const Classifier& model, std::span<const double> input,
                               int class_index, const SmoothGradParams& params);

void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

// Scoring backend used by the evaluation pipelines.
class ImageClassifier {
 public:
  virtual ~ImageClassifier() = default;
  virtual std::vector<std::vector<double>> classify(std::span<const ImageTensor> images) = 0;
};

class BuiltinImageClassifier : public ImageClassifier {
 public:
  explicit BuiltinImageClassifier(const Classifier& model) : model_(model) {}
  std::vector<std::vector<double>> classify(std::span<const ImageTensor> images) override;

 private:
  const Classifier& model_;
};

int argmax(std::span<const double> scores);

}  // namespace peekaboom
