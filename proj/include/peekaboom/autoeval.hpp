#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peekaboom/classifier.hpp"
#include "peekaboom/dataset.hpp"
#include "peekaboom/masking.hpp"
#include "peekaboom/metrics.hpp"
#include "peekaboom/saliency.hpp"

namespace peekaboom {

enum class Scheme { roar, kar, roae, kae };

std::string_view scheme_name(Scheme scheme);  // "ROAR", "KAR", "ROAE", "KAE"
Scheme parse_scheme(std::string_view name);

// Keep schemes retain the top-r fraction of each image, remove schemes fill
// it; all four share one exposure axis.
inline bool keeps_top(Scheme s) { return s == Scheme::kar || s == Scheme::kae; }
inline bool retrains(Scheme s) { return s == Scheme::roar || s == Scheme::kar; }

struct AutoEvalJob {
  Scheme scheme = Scheme::kae;
  std::string method_id;
  ExposureSchedule schedule = ExposureSchedule::game_default();
  // Unset: per-channel mean of the training images (or the test images when
  // no training set is involved).
  std::optional<FillStrategy> fill;
  TrainConfig train;  // ROAR/KAR retraining; train.seed is the job seed
};

// image id -> ranking for the job's method.
using RankingIndex = std::map<std::string, PixelRanking>;

RankingIndex index_rankings(std::span<const SaliencyMap> maps, const std::string& method_id);

// The image as seen by the scheme at `rate`.
ImageTensor scheme_view(Scheme scheme, const ImageTensor& image, const PixelRanking& ranking,
                        double rate, const FillStrategy& fill);

double classifier_accuracy(ImageClassifier& model, std::span<const DatasetItem> data);

// ROAE / KAE on a fixed classifier. One point per rate of {0} + schedule.
// Errors: missing_saliency, invalid_argument for retraining schemes.
AccuracyCurve masked_eval_curve(const AutoEvalJob& job, std::span<const DatasetItem> testset,
                                const RankingIndex& rankings, ImageClassifier& model);

struct RateFailure {
  double rate = 0.0;
  std::string message;
};

struct RetrainResult {
  AccuracyCurve curve;  // successful rates only
  std::vector<RateFailure> failures;
  double baseline_accuracy = 0.0;  // unmodified training set, same seed
};

// ROAR / KAR with the built-in trainable classifier: modify every training
// image at each rate, retrain from the job seed, score on the unmodified
// test set. Divergent retrains are reported per rate.
RetrainResult retrain_curve(const AutoEvalJob& job, std::span<const DatasetItem> trainset,
                            std::span<const DatasetItem> testset, int class_count,
                            const RankingIndex& train_rankings);

}  // namespace peekaboom
