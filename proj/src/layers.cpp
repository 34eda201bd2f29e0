#include "semctx/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "semctx/rng.hpp"

namespace semctx {

Conv2D::Conv2D(int in_channels, int out_channels, int kernel, int stride)
    : weight(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias(static_cast<std::size_t>(out_channels)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1) {
    throw std::invalid_argument("convolution dimensions must be positive");
  }
}

void Conv2D::im2col(const double* x, int h, int w, double* cols) const {
  const int oh = out_extent(h);
  const int ow = out_extent(w);
  const int spatial = oh * ow;
  for (int c = 0; c < in_channels_; ++c) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * spatial;
        for (int oy = 0; oy < oh; ++oy) {
          const double* src = x + (static_cast<std::size_t>(c) * h + oy * stride_ + ky) * w + kx;
          double* dst = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) dst[ox] = src[ox * stride_];
        }
      }
    }
  }
}

void Conv2D::col2im(const double* cols, int h, int w, double* dx) const {
  const int oh = out_extent(h);
  const int ow = out_extent(w);
  const int spatial = oh * ow;
  for (int c = 0; c < in_channels_; ++c) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * spatial;
        for (int oy = 0; oy < oh; ++oy) {
          double* dst = dx + (static_cast<std::size_t>(c) * h + oy * stride_ + ky) * w + kx;
          const double* src = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) dst[ox * stride_] += src[ox];
        }
      }
    }
  }
}

Activations Conv2D::forward(const Activations& in) {
  if (in.channels != in_channels_) {
    throw std::invalid_argument("convolution expects " + std::to_string(in_channels_) + " input channels, got " +
                                std::to_string(in.channels));
  }
  const int oh = out_extent(in.height);
  const int ow = out_extent(in.width);
  if (oh < 1 || ow < 1) throw std::invalid_argument("convolution input is smaller than its kernel");
  const int spatial = oh * ow;
  const int patch = fan_in();
  input_ = Activations();
  input_.batch = in.batch;
  input_.channels = in.channels;
  input_.height = in.height;
  input_.width = in.width;
  cols_.assign(static_cast<std::size_t>(in.batch) * patch * spatial, 0.0);
  Activations out(in.batch, out_channels_, oh, ow);
  for (int i = 0; i < in.batch; ++i) {
    double* cols = cols_.data() + static_cast<std::size_t>(i) * patch * spatial;
    im2col(in.sample(i), in.height, in.width, cols);
    double* y = out.sample(i);
    gemm_nn(out_channels_, spatial, patch, weight.value.data(), cols, y, false);
    for (int o = 0; o < out_channels_; ++o) {
      const double b = bias.value[static_cast<std::size_t>(o)];
      for (int s = 0; s < spatial; ++s) y[o * spatial + s] += b;
    }
  }
  return out;
}

Activations Conv2D::backward(const Activations& grad_out, bool param_grads, bool input_grad) {
  const int spatial = grad_out.height * grad_out.width;
  const int patch = fan_in();
  Activations dx;
  if (input_grad) dx = Activations(input_.batch, input_.channels, input_.height, input_.width);
  std::vector<double> dcols(input_grad ? static_cast<std::size_t>(patch) * spatial : 0);
  for (int i = 0; i < grad_out.batch; ++i) {
    const double* dy = grad_out.sample(i);
    const double* cols = cols_.data() + static_cast<std::size_t>(i) * patch * spatial;
    if (param_grads) {
      gemm_nt(out_channels_, patch, spatial, dy, cols, weight.grad.data(), true);
      for (int o = 0; o < out_channels_; ++o) {
        double sum = 0.0;
        for (int s = 0; s < spatial; ++s) sum += dy[o * spatial + s];
        bias.grad[static_cast<std::size_t>(o)] += sum;
      }
    }
    if (input_grad) {
      gemm_tn(patch, spatial, out_channels_, weight.value.data(), dy, dcols.data(), false);
      col2im(dcols.data(), input_.height, input_.width, dx.sample(i));
    }
  }
  return dx;
}

Activations MaxPool::forward(const Activations& in) {
  const int oh = out_extent(in.height);
  const int ow = out_extent(in.width);
  if (oh < 1 || ow < 1) throw std::invalid_argument("pooling input is smaller than its window");
  in_channels_ = in.channels;
  in_h_ = in.height;
  in_w_ = in.width;
  Activations out(in.batch, in.channels, oh, ow);
  argmax_.assign(out.data.size(), 0);
  std::size_t o = 0;
  for (int i = 0; i < in.batch; ++i) {
    const double* x = in.sample(i);
    for (int c = 0; c < in.channels; ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (int dy = 0; dy < window_; ++dy) {
            for (int dx = 0; dx < window_; ++dx) {
              const std::size_t idx =
                  (static_cast<std::size_t>(c) * in.height + oy * window_ + dy) * in.width + ox * window_ + dx;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          out.data[o] = best;
          argmax_[o] = best_idx;
        }
      }
    }
  }
  return out;
}

Activations MaxPool::backward(const Activations& grad_out) {
  Activations dx(grad_out.batch, in_channels_, in_h_, in_w_);
  const std::size_t per_out = grad_out.sample_size();
  for (int i = 0; i < grad_out.batch; ++i) {
    double* d = dx.sample(i);
    for (std::size_t k = 0; k < per_out; ++k) {
      const std::size_t o = static_cast<std::size_t>(i) * per_out + k;
      d[argmax_[o]] += grad_out.data[o];
    }
  }
  return dx;
}

Activations Relu::forward(const Activations& in) {
  Activations out = in;
  mask_.assign(in.data.size(), 0);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > 0.0) {
      mask_[i] = 1;
    } else {
      out.data[i] = 0.0;
    }
  }
  return out;
}

Activations Relu::backward(const Activations& grad_out) {
  Activations dx = grad_out;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (!mask_[i]) dx.data[i] = 0.0;
  }
  return dx;
}

Dense::Dense(int in_dim, int out_dim)
    : weight(static_cast<std::size_t>(in_dim) * out_dim),
      bias(static_cast<std::size_t>(out_dim)),
      in_dim_(in_dim),
      out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("dense dimensions must be positive");
}

Activations Dense::forward(const Activations& in) {
  if (static_cast<int>(in.sample_size()) != in_dim_) {
    throw std::invalid_argument("dense layer expects " + std::to_string(in_dim_) + " inputs, got " +
                                std::to_string(in.sample_size()));
  }
  input_ = in;
  Activations out(in.batch, out_dim_, 1, 1);
  gemm_nt(in.batch, out_dim_, in_dim_, in.data.data(), weight.value.data(), out.data.data(), false);
  for (int i = 0; i < in.batch; ++i) {
    double* y = out.sample(i);
    for (int o = 0; o < out_dim_; ++o) y[o] += bias.value[static_cast<std::size_t>(o)];
  }
  return out;
}

Activations Dense::backward(const Activations& grad_out, bool param_grads, bool input_grad) {
  if (param_grads) {
    gemm_tn(out_dim_, in_dim_, grad_out.batch, grad_out.data.data(), input_.data.data(), weight.grad.data(), true);
    for (int i = 0; i < grad_out.batch; ++i) {
      const double* dy = grad_out.sample(i);
      for (int o = 0; o < out_dim_; ++o) bias.grad[static_cast<std::size_t>(o)] += dy[o];
    }
  }
  Activations dx;
  if (input_grad) {
    dx = Activations(input_.batch, input_.channels, input_.height, input_.width);
    gemm_nn(grad_out.batch, in_dim_, out_dim_, grad_out.data.data(), weight.value.data(), dx.data.data(), false);
  }
  return dx;
}

std::vector<Parameter*> parameters(LayerOp& op) {
  if (auto* conv = std::get_if<Conv2D>(&op)) return {&conv->weight, &conv->bias};
  if (auto* dense = std::get_if<Dense>(&op)) return {&dense->weight, &dense->bias};
  return {};
}

std::vector<const Parameter*> parameters(const LayerOp& op) {
  if (const auto* conv = std::get_if<Conv2D>(&op)) return {&conv->weight, &conv->bias};
  if (const auto* dense = std::get_if<Dense>(&op)) return {&dense->weight, &dense->bias};
  return {};
}

std::string describe(const LayerOp& op) {
  struct Visitor {
    std::string operator()(const Conv2D& c) const {
      return "conv" + std::to_string(c.kernel()) + "x" + std::to_string(c.out_channels()) + "s" +
             std::to_string(c.stride());
    }
    std::string operator()(const MaxPool& p) const { return "pool" + std::to_string(p.window()); }
    std::string operator()(const Relu&) const { return "relu"; }
    std::string operator()(const Dense& d) const { return "fc" + std::to_string(d.out_dim()); }
  };
  return std::visit(Visitor{}, op);
}

void init_glorot(LayerOp& op, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&rng](Parameter& w, Parameter& b, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.value) v = rng.uniform(-limit, limit);
    std::fill(b.value.begin(), b.value.end(), 0.0);
    w.zero_grad();
    b.zero_grad();
  };
  if (auto* conv = std::get_if<Conv2D>(&op)) {
    fill(conv->weight, conv->bias, conv->fan_in(), conv->out_channels() * conv->kernel() * conv->kernel());
  } else if (auto* dense = std::get_if<Dense>(&op)) {
    fill(dense->weight, dense->bias, dense->in_dim(), dense->out_dim());
  }
}

}  // namespace semctx
