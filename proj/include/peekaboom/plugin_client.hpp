#pragma once

#include <span>
#include <string>
#include <vector>

#include "peekaboom/classifier.hpp"
#include "peekaboom/image.hpp"
#include "peekaboom/saliency.hpp"

namespace peekaboom {

// Client for an external classifier/saliency plugin.
//
//   POST /v1/classify {"images": [png_b64...], "model": id}
//        -> {"scores": [[C floats]...]}
//   POST /v1/saliency {"image": png_b64, "method": m, "class_index": k}
//        -> {"salm": salm_b64}
//
// Error responses carry {"error": code, "message": text}; the code
// "unsupported_method" maps to Errc::unsupported_method.
class PluginClient {
 public:
  explicit PluginClient(std::string endpoint, std::string model_id = "default",
                        int timeout_seconds = 30);

  // One score vector of length class_count per image, in request order.
  // Errors: transport, protocol (malformed body, wrong batch size),
  // score_length_mismatch.
  std::vector<std::vector<double>> classify(std::span<const ImageTensor> images,
                                            std::size_t class_count) const;

  // Full-resolution map for `image`. Errors: unsupported_method,
  // dimension_mismatch (reports both sizes), transport, protocol.
  SaliencyMap saliency(const ImageTensor& image, const std::string& method, int class_index,
                       const std::string& image_id = {}) const;

  const std::string& endpoint() const { return endpoint_; }

  static bool is_plugin_method(const std::string& method);

 private:
  std::string post(const std::string& path, const std::string& body) const;

  std::string endpoint_;
  std::string model_id_;
  int timeout_seconds_;
};

class RemoteImageClassifier : public ImageClassifier {
 public:
  RemoteImageClassifier(PluginClient client, std::size_t class_count, std::size_t batch_size = 32)
      : client_(std::move(client)), class_count_(class_count), batch_size_(batch_size) {}

  std::vector<std::vector<double>> classify(std::span<const ImageTensor> images) override;

 private:
  PluginClient client_;
  std::size_t class_count_;
  std::size_t batch_size_;
};

}  // namespace peekaboom
