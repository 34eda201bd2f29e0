#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semctx {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Batch activations: m samples of `channels x height x width` (width = height = 1 for vectors).
struct Activations {
  int batch = 0;
  int channels = 0;
  int height = 1;
  int width = 1;
  std::vector<double> data;

  Activations() = default;
  Activations(int m, int c, int h, int w)
      : batch(m), channels(c), height(h), width(w), data(static_cast<std::size_t>(m) * c * h * w, 0.0) {}

  std::size_t sample_size() const { return static_cast<std::size_t>(channels) * height * width; }
  double* sample(int i) { return data.data() + sample_size() * i; }
  const double* sample(int i) const { return data.data() + sample_size() * i; }
};

// C (+)= A * B, with A: m x k, B: k x n, all row-major.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C (+)= A^T * B, with A: k x m, B: k x n.
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C (+)= A * B^T, with A: m x k, B: n x k.
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

}  // namespace semctx
