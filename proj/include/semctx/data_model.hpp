#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semctx {

/// Label value of a pixel that carries no ground truth.
inline constexpr int kUnlabeled = -1;
/// Subclass value of a sample that has not been placed in a hierarchy yet.
inline constexpr int kUnassigned = -1;

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PixelPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool contains(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using LabelMap = Grid<int>;
using Rgb = std::array<double, 3>;

/// H x W x 3 raster, interleaved channels, intensities in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int rows, int cols, Rgb fill = {0.0, 0.0, 0.0});

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int r, int c, int ch) { return data_[(static_cast<std::size_t>(r) * cols_ + c) * 3 + ch]; }
  double at(int r, int c, int ch) const { return data_[(static_cast<std::size_t>(r) * cols_ + c) * 3 + ch]; }
  void set(int r, int c, const Rgb& v);
  Rgb get(int r, int c) const;

  /// Per-channel mean over all pixels.
  Rgb mean() const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct LabeledImage {
  std::string id;
  RgbImage pixels;
  LabelMap labels;
  std::optional<std::string> scene_name;

  int rows() const { return labels.rows(); }
  int cols() const { return labels.cols(); }
};

/// Fraction of pixels whose label is not kUnlabeled.
double labeled_fraction(const LabelMap& labels);

struct ClassCatalog {
  std::vector<std::string> names;
  /// Training-sample count per class; filled from sampled patch centers.
  std::vector<long> superpixel_counts;

  int size() const { return static_cast<int>(names.size()); }
  void validate() const;
};

struct TrainingSample {
  std::string image_id;
  std::size_t image_index = 0;
  PixelPos center;
  int class_label = 0;
  int subclass_label = kUnassigned;
};

/// Per-class sample counts, used as the catalog's superpixel counts.
std::vector<long> count_samples_per_class(const std::vector<TrainingSample>& samples, int num_classes);

struct Hyperparameters {
  double rho = 0.93;
  /// Side length of the label-histogram window; nullopt means the whole label map.
  std::optional<int> roi_size = 129;
  double alpha = 1.0;
  double beta = 0.00025;
  int patch_size = 227;
  int batch_size = 64;
  double lr0 = 0.001;
  long lr_step = 20000;
  double lr_factor = 10.0;

  void validate() const;
  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// A set of labeled images that passed validation against a class catalog.
/// Immutable once built.
class Dataset {
 public:
  /// Throws DataError naming the offending image (and pixel) on any invariant violation.
  static Dataset validate(std::vector<LabeledImage> images, ClassCatalog catalog);

  const std::vector<LabeledImage>& images() const { return images_; }
  const ClassCatalog& catalog() const { return catalog_; }
  int num_classes() const { return catalog_.size(); }
  double labeled_fraction(std::size_t index) const { return labeled_fractions_.at(index); }
  /// Channel mean over every pixel of every image.
  const Rgb& channel_mean() const { return channel_mean_; }
  /// Index of the image with the given id, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<LabeledImage> images_;
  ClassCatalog catalog_;
  std::vector<double> labeled_fractions_;
  std::map<std::string, std::size_t, std::less<>> index_;
  Rgb channel_mean_{};
};

}  // namespace semctx
