#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semctx/data_model.hpp"
#include "semctx/hierarchy.hpp"
#include "semctx/model.hpp"

namespace semctx {

/// Patch centers along one axis of length `extent`: stride/2, stride/2 + stride, ...
std::vector<int> grid_positions(int extent, int stride);

/// Index of the nearest grid position for every coordinate in [0, extent); ties go to the lower index.
std::vector<int> nearest_grid_index(int extent, int stride);

/// Classifies patches centered on a stride grid and gives every pixel the label
/// of its nearest evaluated center. Throws std::logic_error for an untrained model.
LabelMap predict_label_map(Model& model, const RgbImage& image, int stride, int batch_size = 128);

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const { return num_classes_; }
  long at(int truth, int predicted) const;
  void add(int truth, int predicted, long count = 1);
  /// Adds every pixel; unlabeled ground truth only bumps ignored().
  void accumulate(const LabelMap& truth, const LabelMap& predicted);
  long ignored() const { return ignored_; }
  /// Counted (non-ignored) pixels.
  long total() const;
  long correct(int cls) const { return at(cls, cls); }
  long row_total(int cls) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int num_classes_;
  std::vector<long> counts_;
  long ignored_ = 0;
};

struct Accuracy {
  double per_pixel = 0.0;
  double per_class = 0.0;
};

/// per_pixel = trace / total. per_class averages c_i / t_i over classes present
/// in the ground truth, or over all classes when `divide_by_all_classes`.
/// Throws DataError when no pixel was counted.
Accuracy accuracy(const ConfusionMatrix& conf, bool divide_by_all_classes = false);

struct ClassDelta {
  int class_id = 0;
  double delta = 0.0;
};

/// Per-class accuracy of b minus that of a, for classes present in both ground
/// truths, in class order. Throws std::invalid_argument on a class count mismatch.
std::vector<ClassDelta> per_class_delta(const ConfusionMatrix& a, const ConfusionMatrix& b);

/// Stable sort, largest improvement first.
std::vector<ClassDelta> sort_deltas_descending(std::vector<ClassDelta> deltas);

struct EvaluationResult {
  ConfusionMatrix confusion;
  std::vector<LabelMap> predictions;
};

/// Predicts every image and accumulates one confusion matrix.
EvaluationResult evaluate_images(Model& model, const std::vector<LabeledImage>& images, int num_classes, int stride);

void write_metrics_csv(const std::filesystem::path& path, const ConfusionMatrix& conf);
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& conf,
                         const std::vector<std::string>& class_names);
void write_per_class_csv(const std::filesystem::path& path, const ConfusionMatrix& conf,
                         const std::vector<std::string>& class_names);
void write_delta_csv(const std::filesystem::path& path, const std::vector<ClassDelta>& deltas,
                     const std::vector<std::string>& class_names);

/// Dense predictor backed by a trained class-level model.
class ModelPredictor : public DensePredictor {
 public:
  ModelPredictor(Model model, int stride) : model_(std::move(model)), stride_(stride) {}
  bool ready() const override { return model_.trained; }
  LabelMap predict(const LabeledImage& image) const override;

 private:
  mutable Model model_;
  int stride_;
};

}  // namespace semctx
