#include "semctx/model.hpp"

#include <algorithm>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "semctx/rng.hpp"

namespace semctx {

std::string label_space_name(LabelSpace s) { return s == LabelSpace::Subclass ? "subclass" : "class"; }

LabelSpace parse_label_space(const std::string& name) {
  if (name == "subclass") return LabelSpace::Subclass;
  if (name == "class") return LabelSpace::Class;
  throw DataError("unknown label space '" + name + "'");
}

std::vector<Layer> build_backbone(const std::string& architecture, int input_size, int* feature_dim) {
  static const std::regex conv_re(R"(conv(\d+)x(\d+)s(\d+))");
  static const std::regex pool_re(R"(pool(\d+))");
  static const std::regex fc_re(R"(fc(\d+))");

  std::vector<Layer> layers;
  int channels = 3;
  int extent = input_size;
  int flat = -1;  // set once the activations are flattened by a dense layer
  std::stringstream ss(architecture);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::smatch m;
    const std::string where = "layer " + std::to_string(layers.size()) + " ('" + tok + "')";
    if (std::regex_match(tok, m, conv_re)) {
      if (flat >= 0) throw std::invalid_argument(where + ": convolution after a dense layer");
      Conv2D conv(channels, std::stoi(m[2]), std::stoi(m[1]), std::stoi(m[3]));
      extent = extent < conv.kernel() ? 0 : conv.out_extent(extent);
      channels = conv.out_channels();
      layers.push_back({conv, true});
    } else if (std::regex_match(tok, m, pool_re)) {
      if (flat >= 0) throw std::invalid_argument(where + ": pooling after a dense layer");
      MaxPool pool(std::stoi(m[1]));
      if (pool.window() < 1) throw std::invalid_argument(where + ": window must be positive");
      extent = pool.out_extent(extent);
      layers.push_back({pool, true});
    } else if (tok == "relu") {
      layers.push_back({Relu{}, true});
    } else if (std::regex_match(tok, m, fc_re)) {
      const int in = flat >= 0 ? flat : channels * extent * extent;
      Dense dense(in, std::stoi(m[1]));
      flat = dense.out_dim();
      layers.push_back({dense, true});
    } else {
      throw std::invalid_argument("unknown layer token '" + tok + "' in architecture");
    }
    if (flat < 0 && extent < 1) {
      throw std::invalid_argument(where + ": spatial size drops below 1 for input " + std::to_string(input_size));
    }
  }
  if (feature_dim) *feature_dim = flat >= 0 ? flat : channels * extent * extent;
  return layers;
}

Model::Model(const std::string& architecture, int input_size, int head_dim, LabelSpace head_space,
             std::uint64_t seed)
    : architecture_(architecture), input_size_(input_size), head_space_(head_space) {
  int feature_dim = 0;
  layers_ = build_backbone(architecture, input_size, &feature_dim);
  for (std::size_t i = 0; i < layers_.size(); ++i) init_glorot(layers_[i].op, derive_seed(seed, "layer", i));
  if (head_dim < 1) throw std::invalid_argument("head dimension must be positive");
  layers_.push_back({Dense(feature_dim, head_dim), true});
  init_glorot(layers_.back().op, derive_seed(seed, "head"));
}

Model model_from_parts(const std::string& architecture, int input_size, std::vector<Layer> layers,
                       LabelSpace head_space) {
  if (layers.empty() || !std::holds_alternative<Dense>(layers.back().op)) {
    throw DataError("model needs a dense head as its last layer");
  }
  Model m;
  m.architecture_ = architecture;
  m.input_size_ = input_size;
  m.layers_ = std::move(layers);
  m.head_space_ = head_space;
  return m;
}

Dense& Model::head() { return std::get<Dense>(layers_.back().op); }
const Dense& Model::head() const { return std::get<Dense>(layers_.back().op); }

void Model::replace_head(int new_out_dim, LabelSpace space, std::uint64_t seed) {
  if (new_out_dim < 2) throw std::invalid_argument("a classification head needs at least 2 outputs");
  const bool trainable = layers_.back().trainable;
  layers_.back() = {Dense(head().in_dim(), new_out_dim), trainable};
  init_glorot(layers_.back().op, seed);
  head_space_ = space;
  aggregation_.reset();
}

void Model::add_hierarchy_head(AggregationMatrix aggregation) {
  if (aggregation.num_subclasses() != head_dim()) {
    throw std::invalid_argument("aggregation matrix has " + std::to_string(aggregation.num_subclasses()) +
                                " columns but the head outputs " + std::to_string(head_dim()));
  }
  if (static_cast<int>(aggregation.parents.size()) != aggregation.num_subclasses()) {
    throw std::invalid_argument("aggregation matrix parent list does not match its columns");
  }
  aggregation.trainable = false;
  aggregation_ = std::move(aggregation);
  head_space_ = LabelSpace::Subclass;
}

AggregationMatrix& Model::aggregation() {
  if (!aggregation_) throw std::logic_error("model has no aggregation layer");
  return *aggregation_;
}

const AggregationMatrix& Model::aggregation() const {
  if (!aggregation_) throw std::logic_error("model has no aggregation layer");
  return *aggregation_;
}

void Model::apply_freeze_mask(const std::vector<bool>& frozen) {
  if (static_cast<int>(frozen.size()) != layer_count()) {
    throw std::invalid_argument("freeze mask has " + std::to_string(frozen.size()) + " entries for " +
                                std::to_string(layer_count()) + " layers");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].trainable = !frozen[i];
}

std::vector<bool> Model::freeze_mask() const {
  std::vector<bool> mask;
  for (const auto& l : layers_) mask.push_back(!l.trainable);
  return mask;
}

Matrix Model::forward(const Activations& input) {
  if (input.channels != 3 || input.height != input_size_ || input.width != input_size_) {
    throw std::invalid_argument("model expects 3x" + std::to_string(input_size_) + "x" + std::to_string(input_size_) +
                                " inputs, got " + std::to_string(input.channels) + "x" +
                                std::to_string(input.height) + "x" + std::to_string(input.width));
  }
  Activations x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = std::visit([&x](auto& op) { return op.forward(x); }, layers_[i].op);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("layer " + std::to_string(i) + " (" + describe(layers_[i].op) + "): " + e.what());
    }
  }
  Matrix logits(x.batch, static_cast<int>(x.sample_size()));
  logits.data() = std::move(x.data);
  return logits;
}

Matrix Model::class_scores(const Matrix& logits) const {
  if (!aggregation_) return logits;
  Matrix out(logits.rows(), aggregation_->num_classes());
  for (int i = 0; i < logits.rows(); ++i) {
    const auto s = aggregation_->apply(logits.row(i));
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

void Model::backward(const Matrix& grad_logits) {
  // Lowest trainable layer; nothing below it needs gradients.
  int lowest = -1;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].trainable) {
      lowest = static_cast<int>(i);
      break;
    }
  }
  if (lowest < 0) return;
  Activations g(grad_logits.rows(), grad_logits.cols(), 1, 1);
  g.data = grad_logits.data();
  for (int i = layer_count() - 1; i >= lowest; --i) {
    auto& layer = layers_[static_cast<std::size_t>(i)];
    const bool need_input = i > lowest;
    struct Visitor {
      const Activations& g;
      bool params;
      bool input;
      Activations operator()(Conv2D& c) const { return c.backward(g, params, input); }
      Activations operator()(Dense& d) const { return d.backward(g, params, input); }
      Activations operator()(MaxPool& p) const { return input ? p.backward(g) : Activations{}; }
      Activations operator()(Relu& r) const { return input ? r.backward(g) : Activations{}; }
    };
    g = std::visit(Visitor{g, layer.trainable, need_input}, layer.op);
  }
}

void Model::zero_grad() {
  for (auto& l : layers_) {
    for (auto* p : parameters(l.op)) p->zero_grad();
  }
}

std::vector<int> Model::predict_classes(const Activations& input) {
  if (!aggregation_ && head_space_ != LabelSpace::Class) {
    throw std::logic_error("class prediction needs a class head or an aggregation layer");
  }
  const Matrix scores = class_scores(forward(input));
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (int i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Activations Model::make_input(std::span<const Patch> patches) const {
  Activations in(static_cast<int>(patches.size()), 3, input_size_, input_size_);
  const int plane = input_size_ * input_size_;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    if (p.size != input_size_) {
      throw std::invalid_argument("patch of size " + std::to_string(p.size) + " for a model with input " +
                                  std::to_string(input_size_));
    }
    double* dst = in.sample(static_cast<int>(i));
    for (int k = 0; k < plane; ++k) {
      for (int ch = 0; ch < 3; ++ch) dst[ch * plane + k] = p.pixels[static_cast<std::size_t>(k) * 3 + ch] - input_mean[ch];
    }
  }
  return in;
}

bool same_parameters(const Model& a, const Model& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto pa = parameters(a.layers_[i].op);
    const auto pb = parameters(b.layers_[i].op);
    if (pa.size() != pb.size()) return false;
    for (std::size_t k = 0; k < pa.size(); ++k) {
      if (pa[k]->value != pb[k]->value) return false;
    }
  }
  if (a.aggregation_.has_value() != b.aggregation_.has_value()) return false;
  if (a.aggregation_ && a.aggregation_->weights != b.aggregation_->weights) return false;
  return true;
}

}  // namespace semctx
