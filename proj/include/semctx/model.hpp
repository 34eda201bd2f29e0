#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semctx/augmentation.hpp"
#include "semctx/hierarchy.hpp"
#include "semctx/layers.hpp"
#include "semctx/tensor.hpp"

namespace semctx {

enum class LabelSpace { Subclass, Class };

std::string label_space_name(LabelSpace s);
LabelSpace parse_label_space(const std::string& name);

/// Backbone description: comma-separated layer tokens, e.g.
/// "conv5x16s2,relu,pool2,conv3x32s1,relu,pool2,fc64,relu".
inline constexpr const char* kDefaultArchitecture = "conv5x16s2,relu,pool2,conv3x32s1,relu,pool2,fc64,relu";
inline constexpr int kDefaultInputSize = 64;

/// Convolutional classifier: backbone layers followed by a fully connected head,
/// optionally topped by a subclass-to-class aggregation layer. The head is the
/// last entry of layers().
class Model {
 public:
  Model(const std::string& architecture, int input_size, int head_dim, LabelSpace head_space, std::uint64_t seed);

  const std::string& architecture() const { return architecture_; }
  int input_size() const { return input_size_; }
  /// Backbone layers plus the head.
  int layer_count() const { return static_cast<int>(layers_.size()); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Dense& head();
  const Dense& head() const;
  int head_dim() const { return head().out_dim(); }
  LabelSpace head_label_space() const { return head_space_; }

  /// New randomly initialized head; other layers untouched. Drops any aggregation layer.
  void replace_head(int new_out_dim, LabelSpace space, std::uint64_t seed);
  /// Exposes class scores W * p on top of the subclass head; W starts frozen.
  void add_hierarchy_head(AggregationMatrix aggregation);
  bool has_hierarchy() const { return aggregation_.has_value(); }
  AggregationMatrix& aggregation();
  const AggregationMatrix& aggregation() const;

  /// true marks a layer frozen; the mask covers backbone layers and the head.
  void apply_freeze_mask(const std::vector<bool>& frozen);
  std::vector<bool> freeze_mask() const;

  /// Logits of the head (m x head_dim); caches activations for backward().
  Matrix forward(const Activations& input);
  /// Class scores: W * p per row with an aggregation layer, the logits otherwise.
  Matrix class_scores(const Matrix& logits) const;
  /// Accumulates parameter gradients of trainable layers from d loss / d logits.
  void backward(const Matrix& grad_logits);
  void zero_grad();

  /// Argmax class per input. Needs a class head or an aggregation layer.
  std::vector<int> predict_classes(const Activations& input);

  /// Batch input from patches, channels first, minus input_mean.
  Activations make_input(std::span<const Patch> patches) const;

  /// Per-channel value subtracted from every input pixel.
  Rgb input_mean{0.0, 0.0, 0.0};
  /// Set once any optimization step has run.
  bool trained = false;
  /// Id of the hierarchy the subclass head was trained against, if any.
  std::string hierarchy_id;

  friend bool same_parameters(const Model& a, const Model& b);

 private:
  Model() = default;
  friend Model model_from_parts(const std::string&, int, std::vector<Layer>, LabelSpace);

  std::string architecture_;
  int input_size_ = 0;
  std::vector<Layer> layers_;
  LabelSpace head_space_ = LabelSpace::Class;
  std::optional<AggregationMatrix> aggregation_;
};

/// Builds a model around already-initialized layers (checkpoint loading).
Model model_from_parts(const std::string& architecture, int input_size, std::vector<Layer> layers,
                       LabelSpace head_space);

/// Backbone layers for an architecture string at the given input size.
std::vector<Layer> build_backbone(const std::string& architecture, int input_size, int* feature_dim);

/// Bit-exact comparison of every parameter tensor and the aggregation matrix.
bool same_parameters(const Model& a, const Model& b);

}  // namespace semctx
