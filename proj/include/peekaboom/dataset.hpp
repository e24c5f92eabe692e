#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "peekaboom/image.hpp"

namespace peekaboom {

struct DatasetItem {
  std::string id;
  ImageTensor image;
  int label = 0;
  // One byte per pixel (1 = object); empty when no ground truth exists.
  std::vector<std::uint8_t> object_mask;

  bool operator==(const DatasetItem&) const = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<DatasetItem> items;

  int class_count() const { return static_cast<int>(class_names.size()); }
  const DatasetItem& find(const std::string& id) const;

  // Same image shape for every item; labels in range.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// On disk: <dir>/manifest.json plus images/<id>.png and masks/<id>.png.
// manifest.json: {"classes": [...], "items": [{"id", "label", "image", "mask"?}]}
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace peekaboom
