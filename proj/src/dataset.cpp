#include "peekaboom/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "peekaboom/error.hpp"
#include "peekaboom/png_io.hpp"

namespace peekaboom {

namespace fs = std::filesystem;
using nlohmann::json;

const DatasetItem& Dataset::find(const std::string& id) const {
  for (const auto& item : items) {
    if (item.id == id) return item;
  }
  fail(Errc::not_found, "dataset has no image '" + id + "'");
}

void Dataset::validate() const {
  if (class_names.empty()) fail(Errc::invalid_argument, "dataset has no classes");
  if (items.empty()) fail(Errc::invalid_argument, "dataset is empty");
  const auto& first = items.front().image;
  for (const auto& item : items) {
    item.image.validate();
    if (item.image.width != first.width || item.image.height != first.height ||
        item.image.channels != first.channels) {
      fail(Errc::dimension_mismatch, "image '" + item.id + "' has a different shape");
    }
    if (item.label < 0 || item.label >= class_count()) {
      fail(Errc::out_of_range, "label of '" + item.id + "' out of range");
    }
    if (!item.object_mask.empty() && item.object_mask.size() != item.image.pixel_count()) {
      fail(Errc::dimension_mismatch, "mask of '" + item.id + "' has wrong size");
    }
  }
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir / "images");
  json manifest;
  manifest["classes"] = dataset.class_names;
  manifest["items"] = json::array();
  for (const auto& item : dataset.items) {
    json entry{{"id", item.id}, {"label", item.label}, {"image", "images/" + item.id + ".png"}};
    write_file_bytes(dir / "images" / (item.id + ".png"), encode_png(item.image));
    if (!item.object_mask.empty()) {
      fs::create_directories(dir / "masks");
      entry["mask"] = "masks/" + item.id + ".png";
      write_file_bytes(dir / "masks" / (item.id + ".png"),
                       encode_mask_png(item.object_mask, item.image.width, item.image.height));
    }
    manifest["items"].push_back(std::move(entry));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) fail(Errc::io, "no manifest.json in " + dir.string());
  Dataset dataset;
  try {
    const json manifest = json::parse(in);
    dataset.class_names = manifest.at("classes").get<std::vector<std::string>>();
    for (const auto& entry : manifest.at("items")) {
      DatasetItem item;
      item.id = entry.at("id").get<std::string>();
      item.label = entry.at("label").get<int>();
      item.image = decode_png(read_file_bytes(dir / entry.at("image").get<std::string>()));
      if (entry.contains("mask")) {
        std::size_t w = 0, h = 0;
        item.object_mask =
            decode_mask_png(read_file_bytes(dir / entry.at("mask").get<std::string>()), w, h);
        if (w != item.image.width || h != item.image.height) {
          fail(Errc::dimension_mismatch, "mask of '" + item.id + "' does not match its image");
        }
      }
      dataset.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    fail(Errc::schema, "malformed manifest in " + dir.string() + ": " + e.what());
  }
  dataset.validate();
  return dataset;
}

}  // namespace peekaboom
