#pragma once

// On-disk dataset layout.
//
//   classes file   one class name per line; line index is the class id.
//   manifest       UTF-8, tab separated: image_id, image_path, labelmap_path,
//                  scene name or "-". Relative paths resolve against the
//                  manifest's directory.
//   images         binary PPM (P6, maxval 255); intensities are value / 255.
//   label maps     binary PGM (P5, maxval 255) with 255 = unlabeled, or a
//                  ".txt" grid of whitespace-separated integers with -1 = unlabeled.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semctx/data_model.hpp"

namespace semctx {

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path image_path;
  std::filesystem::path labelmap_path;
  std::optional<std::string> scene_name;
};

RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Dispatches on extension: ".txt" is the integer grid, anything else PGM.
LabelMap read_label_map(const std::filesystem::path& path);
void write_label_map(const std::filesystem::path& path, const LabelMap& labels);

ClassCatalog read_class_list(const std::filesystem::path& path);
void write_class_list(const std::filesystem::path& path, const ClassCatalog& catalog);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

std::vector<LabeledImage> load_images(const std::filesystem::path& manifest);
Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& classes);

}  // namespace semctx
