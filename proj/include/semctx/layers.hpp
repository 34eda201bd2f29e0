#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "semctx/tensor.hpp"

namespace semctx {

/// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::vector<double> value;
  std::vector<double> grad;

  explicit Parameter(std::size_t n = 0) : value(n, 0.0), grad(n, 0.0) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Valid (unpadded) 2-D convolution.
class Conv2D {
 public:
  Conv2D(int in_channels, int out_channels, int kernel, int stride);

  Activations forward(const Activations& in);
  /// Accumulates parameter gradients when `param_grads`; returns the input gradient when `input_grad`.
  Activations backward(const Activations& grad_out, bool param_grads, bool input_grad);
  int out_extent(int in_extent) const { return (in_extent - kernel_) / stride_ + 1; }

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int fan_in() const { return in_channels_ * kernel_ * kernel_; }

  /// out_channels x (in_channels * kernel * kernel).
  Parameter weight;
  Parameter bias;

 private:
  void im2col(const double* x, int h, int w, double* cols) const;
  void col2im(const double* cols, int h, int w, double* dx) const;

  int in_channels_;
  int out_channels_;
  int kernel_;
  int stride_;
  Activations input_;
  std::vector<double> cols_;
};

/// Non-overlapping max pooling with a square window; trailing rows/cols that do not fill a window are dropped.
class MaxPool {
 public:
  explicit MaxPool(int window) : window_(window) {}

  Activations forward(const Activations& in);
  Activations backward(const Activations& grad_out);
  int out_extent(int in_extent) const { return in_extent / window_; }
  int window() const { return window_; }

 private:
  int window_;
  int in_channels_ = 0, in_h_ = 0, in_w_ = 0;
  std::vector<std::size_t> argmax_;
};

class Relu {
 public:
  Activations forward(const Activations& in);
  Activations backward(const Activations& grad_out);

 private:
  std::vector<unsigned char> mask_;
};

/// Fully connected layer over the flattened input.
class Dense {
 public:
  Dense(int in_dim, int out_dim);

  Activations forward(const Activations& in);
  Activations backward(const Activations& grad_out, bool param_grads, bool input_grad);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  /// out_dim x in_dim.
  Parameter weight;
  Parameter bias;

 private:
  int in_dim_;
  int out_dim_;
  Activations input_;
};

using LayerOp = std::variant<Conv2D, MaxPool, Relu, Dense>;

struct Layer {
  LayerOp op;
  bool trainable = true;
};

std::vector<Parameter*> parameters(LayerOp& op);
std::vector<const Parameter*> parameters(const LayerOp& op);
std::string describe(const LayerOp& op);

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
void init_glorot(LayerOp& op, std::uint64_t seed);

}  // namespace semctx
