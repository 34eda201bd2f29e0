#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semctx/augmentation.hpp"
#include "semctx/data_model.hpp"
#include "semctx/model.hpp"

namespace semctx {

/// Step learning rate: lr0 / lr_factor^floor(iteration / lr_step).
double learning_rate(const Hyperparameters& hyper, long iteration);

struct StepLoss {
  double total = 0.0;
  /// NaN when the step did not use that label space.
  double subclass_ce = 0.0;
  double class_ce = 0.0;
  double decay = 0.0;
};

/// (beta / 2) * squared norm over trainable tensors, including W when trainable.
double trainable_squared_norm(const Model& model);

/// One mini-batch SGD step. With an aggregation layer the joint subclass/class
/// loss is used; otherwise cross-entropy in the head's label space. Frozen
/// layers and a frozen W are left bit-identical. Throws NumericalError on a
/// non-finite loss or gradient.
StepLoss train_step(Model& model, const Activations& input, std::span<const int> subclass_labels,
                    std::span<const int> class_labels, const Hyperparameters& hyper, double lr);

/// Images and samples the optimizer draws patches from.
struct TrainingData {
  std::vector<LabeledImage> images;
  std::vector<TrainingSample> samples;
  /// Per-image padding color.
  std::vector<Rgb> image_means;

  static TrainingData from(std::vector<LabeledImage> images, std::vector<TrainingSample> samples);
};

/// Patches for the given sample indices, mean-padded with each image's mean.
std::vector<Patch> gather_patches(const TrainingData& data, std::span<const std::size_t> indices, int patch_size);

}  // namespace semctx
