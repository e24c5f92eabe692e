#include "peekaboom/plugin_client.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>

#include "peekaboom/encoding.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/png_io.hpp"
#include "peekaboom/salm.hpp"

namespace peekaboom {

using nlohmann::json;

PluginClient::PluginClient(std::string endpoint, std::string model_id, int timeout_seconds)
    : endpoint_(std::move(endpoint)), model_id_(std::move(model_id)),
      timeout_seconds_(timeout_seconds) {}

bool PluginClient::is_plugin_method(const std::string& method) {
  return method == "gradcam" || method == "guided_bp" || method == "smoothgrad" ||
         method == "vanilla";
}

std::string PluginClient::post(const std::string& path, const std::string& body) const {
  httplib::Client client(endpoint_);
  if (!client.is_valid()) fail(Errc::transport, "invalid plugin endpoint '" + endpoint_ + "'");
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    fail(Errc::transport, "plugin request to " + endpoint_ + path + " failed: " +
                              httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    std::string code, message = res->body;
    try {
      const json err = json::parse(res->body);
      code = err.value("error", "");
      message = err.value("message", code);
    } catch (const json::exception&) {
    }
    if (code == "unsupported_method") fail(Errc::unsupported_method, message);
    fail(Errc::protocol, "plugin returned HTTP " + std::to_string(res->status) + ": " + message);
  }
  return res->body;
}

std::vector<std::vector<double>> PluginClient::classify(std::span<const ImageTensor> images,
                                                        std::size_t class_count) const {
  if (images.empty()) fail(Errc::invalid_argument, "classify: empty batch");
  json request{{"model", model_id_}, {"images", json::array()}};
  for (const auto& img : images) request["images"].push_back(base64_encode(encode_png(img)));
  const std::string body = post("/v1/classify", request.dump());

  std::vector<std::vector<double>> scores;
  try {
    const json response = json::parse(body);
    const auto& rows = response.at("scores");
    if (!rows.is_array() || rows.size() != images.size()) {
      fail(Errc::protocol, "classify response has " +
                               std::to_string(rows.is_array() ? rows.size() : 0) +
                               " score vectors for a batch of " + std::to_string(images.size()));
    }
    for (const auto& row : rows) {
      auto values = row.get<std::vector<double>>();
      for (double v : values) {
        if (!std::isfinite(v)) fail(Errc::protocol, "classify response has a non-finite score");
      }
      scores.push_back(std::move(values));
    }
  } catch (const json::exception& e) {
    fail(Errc::protocol, std::string("malformed classify response: ") + e.what());
  }
  for (const auto& row : scores) {
    if (row.size() != class_count) {
      fail(Errc::score_length_mismatch, "score vector has " + std::to_string(row.size()) +
                                            " entries, expected " + std::to_string(class_count));
    }
  }
  return scores;
}

SaliencyMap PluginClient::saliency(const ImageTensor& image, const std::string& method,
                                   int class_index, const std::string& image_id) const {
  if (!is_plugin_method(method)) {
    fail(Errc::unsupported_method, "plugin does not serve method '" + method + "'");
  }
  json request{{"image", base64_encode(encode_png(image))},
               {"method", method},
               {"class_index", class_index}};
  const std::string body = post("/v1/saliency", request.dump());
  SaliencyMap map;
  try {
    const json response = json::parse(body);
    map = decode_salm(base64_decode(response.at("salm").get<std::string>()));
  } catch (const json::exception& e) {
    fail(Errc::protocol, std::string("malformed saliency response: ") + e.what());
  }
  if (map.width != image.width || map.height != image.height) {
    fail(Errc::dimension_mismatch,
         "plugin map is " + std::to_string(map.width) + "x" + std::to_string(map.height) +
             " but image is " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  map.method_id = method;
  if (!image_id.empty()) map.image_id = image_id;
  return map;
}

std::vector<std::vector<double>> RemoteImageClassifier::classify(
    std::span<const ImageTensor> images) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch_size_) {
    const std::size_t n = std::min(batch_size_, images.size() - start);
    auto part = client_.classify(images.subspan(start, n), class_count_);
    for (auto& row : part) out.push_back(std::move(row));
  }
  return out;
}

}  // namespace peekaboom
