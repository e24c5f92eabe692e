#include "peekaboom/autoeval.hpp"

#include "peekaboom/error.hpp"

namespace peekaboom {

namespace {

const PixelRanking& lookup(const RankingIndex& rankings, const std::string& image_id,
                           const std::string& method_id) {
  auto it = rankings.find(image_id);
  if (it == rankings.end()) {
    fail(Errc::missing_saliency, "no " + method_id + " saliency for image '" + image_id + "'");
  }
  return it->second;
}

std::vector<ImageTensor> images_of(std::span<const DatasetItem> data) {
  std::vector<ImageTensor> out;
  out.reserve(data.size());
  for (const auto& item : data) out.push_back(item.image);
  return out;
}

}  // namespace

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::roar: return "ROAR";
    case Scheme::kar: return "KAR";
    case Scheme::roae: return "ROAE";
    case Scheme::kae: return "KAE";
  }
  return "KAE";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "ROAR" || name == "roar") return Scheme::roar;
  if (name == "KAR" || name == "kar") return Scheme::kar;
  if (name == "ROAE" || name == "roae") return Scheme::roae;
  if (name == "KAE" || name == "kae") return Scheme::kae;
  fail(Errc::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

RankingIndex index_rankings(std::span<const SaliencyMap> maps, const std::string& method_id) {
  RankingIndex index;
  for (const auto& m : maps) {
    if (m.method_id == method_id) index[m.image_id] = rank_pixels(m);
  }
  return index;
}

ImageTensor scheme_view(Scheme scheme, const ImageTensor& image, const PixelRanking& ranking,
                        double rate, const FillStrategy& fill) {
  const RevealSet top = reveal_set(ranking, rate, image.pixel_count());
  return keeps_top(scheme) ? apply_mask(image, top, fill) : apply_removal(image, top, fill);
}

double classifier_accuracy(ImageClassifier& model, std::span<const DatasetItem> data) {
  if (data.empty()) fail(Errc::invalid_argument, "cannot score an empty set");
  const auto images = images_of(data);
  const auto scores = model.classify(images);
  if (scores.size() != data.size()) fail(Errc::protocol, "classifier dropped images");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax(scores[i]) == data[i].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

AccuracyCurve masked_eval_curve(const AutoEvalJob& job, std::span<const DatasetItem> testset,
                                const RankingIndex& rankings, ImageClassifier& model) {
  if (retrains(job.scheme)) {
    fail(Errc::invalid_argument, std::string(scheme_name(job.scheme)) +
                                     " modifies the training set; use retrain_curve");
  }
  if (testset.empty()) fail(Errc::invalid_argument, "test set is empty");
  const auto originals = images_of(testset);
  const FillStrategy fill = job.fill.value_or(FillStrategy::dataset_mean(channel_means(originals)));
  for (const auto& item : testset) lookup(rankings, item.id, job.method_id);

  AccuracyCurve curve;
  curve.method_id = job.method_id;
  curve.scheme = std::string(scheme_name(job.scheme));
  for (double rate : job.schedule.with_origin()) {
    std::vector<DatasetItem> view(testset.begin(), testset.end());
    for (auto& item : view) {
      item.image = scheme_view(job.scheme, item.image, lookup(rankings, item.id, job.method_id),
                               rate, fill);
    }
    curve.points.push_back({rate, classifier_accuracy(model, view)});
  }
  return curve;
}

RetrainResult retrain_curve(const AutoEvalJob& job, std::span<const DatasetItem> trainset,
                            std::span<const DatasetItem> testset, int class_count,
                            const RankingIndex& train_rankings) {
  if (!retrains(job.scheme)) {
    fail(Errc::invalid_argument, std::string(scheme_name(job.scheme)) +
                                     " keeps the training set; use masked_eval_curve");
  }
  if (trainset.empty() || testset.empty()) fail(Errc::invalid_argument, "empty split");
  const auto originals = images_of(trainset);
  const FillStrategy fill = job.fill.value_or(FillStrategy::dataset_mean(channel_means(originals)));
  for (const auto& item : trainset) lookup(train_rankings, item.id, job.method_id);

  RetrainResult result;
  result.curve.method_id = job.method_id;
  result.curve.scheme = std::string(scheme_name(job.scheme));
  result.baseline_accuracy = accuracy(train(trainset, class_count, job.train).model, testset);

  for (double rate : job.schedule.with_origin()) {
    std::vector<DatasetItem> modified(trainset.begin(), trainset.end());
    for (auto& item : modified) {
      item.image = scheme_view(job.scheme, item.image,
                               lookup(train_rankings, item.id, job.method_id), rate, fill);
    }
    try {
      const TrainReport fitted = train(modified, class_count, job.train);
      result.curve.points.push_back({rate, accuracy(fitted.model, testset)});
    } catch (const Error& e) {
      if (e.code() != Errc::training_diverged) throw;
      result.failures.push_back({rate, e.what()});
    }
  }
  return result;
}

}  // namespace peekaboom
