#include "semctx/training.hpp"

#include <cmath>
#include <limits>

#include "semctx/loss.hpp"

namespace semctx {
namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void sgd_update(Parameter& p, double lr, double beta) {
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * (p.grad[i] + beta * p.value[i]);
}

}  // namespace

double learning_rate(const Hyperparameters& hyper, long iteration) {
  return hyper.lr0 / std::pow(hyper.lr_factor, static_cast<double>(iteration / hyper.lr_step));
}

double trainable_squared_norm(const Model& model) {
  double sum = 0.0;
  for (const auto& l : model.layers()) {
    if (!l.trainable) continue;
    for (const auto* p : parameters(l.op)) {
      for (double v : p->value) sum += v * v;
    }
  }
  if (model.has_hierarchy() && model.aggregation().trainable) {
    for (double v : model.aggregation().weights.data()) sum += v * v;
  }
  return sum;
}

StepLoss train_step(Model& model, const Activations& input, std::span<const int> subclass_labels,
                    std::span<const int> class_labels, const Hyperparameters& hyper, double lr) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  model.zero_grad();
  const Matrix logits = model.forward(input);
  const double sq_norm = trainable_squared_norm(model);

  StepLoss loss;
  Matrix grad_logits;
  Matrix grad_w;
  if (model.has_hierarchy()) {
    auto out = hierarchical_loss(logits, subclass_labels, class_labels, model.aggregation(), hyper.alpha, hyper.beta,
                                 sq_norm);
    loss = {out.total, out.subclass_ce, out.class_ce, out.decay};
    grad_logits = std::move(out.grad_logits);
    grad_w = std::move(out.grad_aggregation);
  } else {
    const bool subclass = model.head_label_space() == LabelSpace::Subclass;
    const auto ce = softmax_ce_batch(logits, subclass ? subclass_labels : class_labels);
    loss.decay = 0.5 * hyper.beta * sq_norm;
    loss.total = ce.mean + loss.decay;
    loss.subclass_ce = subclass ? ce.mean : nan;
    loss.class_ce = subclass ? nan : ce.mean;
    grad_logits = ce.grad;
  }
  if (!std::isfinite(loss.total)) throw NumericalError("non-finite loss");

  model.backward(grad_logits);
  for (auto& l : model.layers()) {
    if (!l.trainable) continue;
    for (auto* p : parameters(l.op)) {
      if (!all_finite(p->grad)) throw NumericalError("non-finite gradient");
    }
  }
  if (model.has_hierarchy() && model.aggregation().trainable && !all_finite(grad_w.data())) {
    throw NumericalError("non-finite gradient for the aggregation matrix");
  }

  for (auto& l : model.layers()) {
    if (!l.trainable) continue;
    for (auto* p : parameters(l.op)) sgd_update(*p, lr, hyper.beta);
  }
  if (model.has_hierarchy() && model.aggregation().trainable) {
    auto& w = model.aggregation().weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (grad_w.data()[i] + hyper.beta * w[i]);
  }
  model.trained = true;
  return loss;
}

TrainingData TrainingData::from(std::vector<LabeledImage> images, std::vector<TrainingSample> samples) {
  TrainingData d;
  d.image_means.reserve(images.size());
  for (const auto& img : images) d.image_means.push_back(img.pixels.mean());
  d.images = std::move(images);
  d.samples = std::move(samples);
  return d;
}

std::vector<Patch> gather_patches(const TrainingData& data, std::span<const std::size_t> indices, int patch_size) {
  std::vector<Patch> patches;
  patches.reserve(indices.size());
  for (auto i : indices) {
    const auto& s = data.samples.at(i);
    patches.push_back(
        extract_patch(data.images.at(s.image_index).pixels, s.center, patch_size, data.image_means[s.image_index]));
  }
  return patches;
}

}  // namespace semctx
