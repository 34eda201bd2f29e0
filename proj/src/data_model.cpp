#include "semctx/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace semctx {

RgbImage::RgbImage(int rows, int cols, Rgb fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols * 3) {
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

void RgbImage::set(int r, int c, const Rgb& v) {
  for (int ch = 0; ch < 3; ++ch) at(r, c, ch) = v[ch];
}

Rgb RgbImage::get(int r, int c) const { return {at(r, c, 0), at(r, c, 1), at(r, c, 2)}; }

Rgb RgbImage::mean() const {
  Rgb sum{0.0, 0.0, 0.0};
  if (data_.empty()) return sum;
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    sum[0] += data_[i];
    sum[1] += data_[i + 1];
    sum[2] += data_[i + 2];
  }
  const double n = static_cast<double>(data_.size() / 3);
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

double labeled_fraction(const LabelMap& labels) {
  if (labels.size() == 0) return 0.0;
  const auto labeled = std::count_if(labels.data().begin(), labels.data().end(),
                                     [](int v) { return v != kUnlabeled; });
  return static_cast<double>(labeled) / static_cast<double>(labels.size());
}

void ClassCatalog::validate() const {
  if (names.empty()) throw DataError("class catalog is empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw DataError("duplicate class name '" + n + "'");
  }
  if (!superpixel_counts.empty() && superpixel_counts.size() != names.size()) {
    throw DataError("class catalog has " + std::to_string(names.size()) + " names but " +
                    std::to_string(superpixel_counts.size()) + " counts");
  }
  for (long c : superpixel_counts) {
    if (c < 0) throw DataError("negative superpixel count in class catalog");
  }
}

std::vector<long> count_samples_per_class(const std::vector<TrainingSample>& samples, int num_classes) {
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& s : samples) {
    if (s.class_label < 0 || s.class_label >= num_classes) {
      throw DataError("sample from '" + s.image_id + "' has class " + std::to_string(s.class_label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++counts[static_cast<std::size_t>(s.class_label)];
  }
  return counts;
}

void Hyperparameters::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw DataError("rho must lie in (0, 1]");
  if (roi_size && (*roi_size < 1 || *roi_size % 2 == 0)) {
    throw DataError("ROI size must be a positive odd integer or inf, got " + std::to_string(*roi_size));
  }
  if (alpha < 0.0 || beta < 0.0) throw DataError("alpha and beta must be non-negative");
  if (patch_size < 1 || batch_size < 1) throw DataError("patch_size and batch_size must be positive");
  if (!(lr0 > 0.0) || lr_step < 1 || !(lr_factor > 0.0)) throw DataError("invalid learning-rate schedule");
}

Dataset Dataset::validate(std::vector<LabeledImage> images, ClassCatalog catalog) {
  if (images.empty()) throw DataError("dataset has no images");
  catalog.validate();
  const int num_classes = catalog.size();

  std::set<std::string> ids;
  for (const auto& img : images) {
    if (!ids.insert(img.id).second) throw DataError("duplicate image id '" + img.id + "'");
    if (img.pixels.rows() != img.labels.rows() || img.pixels.cols() != img.labels.cols()) {
      std::ostringstream msg;
      msg << "image '" << img.id << "': raster is " << img.pixels.rows() << "x" << img.pixels.cols()
          << " but label map is " << img.labels.rows() << "x" << img.labels.cols();
      throw DataError(msg.str());
    }
    if (img.labels.rows() == 0 || img.labels.cols() == 0) throw DataError("image '" + img.id + "' is empty");
    for (int r = 0; r < img.labels.rows(); ++r) {
      for (int c = 0; c < img.labels.cols(); ++c) {
        const int v = img.labels(r, c);
        if (v != kUnlabeled && (v < 0 || v >= num_classes)) {
          std::ostringstream msg;
          msg << "image '" << img.id << "': label " << v << " at pixel (" << r << ", " << c
              << ") is outside [0, " << num_classes << ")";
          throw DataError(msg.str());
        }
      }
    }
    for (double v : img.pixels.data()) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DataError("image '" + img.id + "' has an intensity outside [0, 1]");
      }
    }
  }

  Dataset ds;
  ds.labeled_fractions_.reserve(images.size());
  for (const auto& img : images) ds.labeled_fractions_.push_back(semctx::labeled_fraction(img.labels));

  // Sum per-image totals in id order so the mean does not depend on list order.
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return images[a].id < images[b].id; });
  Rgb sum{0.0, 0.0, 0.0};
  double pixels = 0.0;
  for (auto i : order) {
    const auto& data = images[i].pixels.data();
    Rgb local{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < data.size(); k += 3) {
      local[0] += data[k];
      local[1] += data[k + 1];
      local[2] += data[k + 2];
    }
    for (int ch = 0; ch < 3; ++ch) sum[ch] += local[ch];
    pixels += static_cast<double>(data.size() / 3);
  }
  for (int ch = 0; ch < 3; ++ch) ds.channel_mean_[ch] = sum[ch] / pixels;

  for (std::size_t i = 0; i < images.size(); ++i) ds.index_.emplace(images[i].id, i);
  ds.images_ = std::move(images);
  ds.catalog_ = std::move(catalog);
  return ds;
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace semctx
