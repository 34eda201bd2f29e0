#include "semctx/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semctx {

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> q(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    q[i] = std::exp(logits[i] - mx);
    sum += q[i];
  }
  for (double& v : q) v /= sum;
  return q;
}

double softmax_ce(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside the logit vector");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return std::log(sum) - (logits[static_cast<std::size_t>(label)] - mx);
}

CrossEntropy softmax_ce_batch(const Matrix& logits, std::span<const int> labels) {
  const int m = logits.rows();
  if (static_cast<int>(labels.size()) != m) throw std::invalid_argument("one label per logit row is required");
  CrossEntropy out;
  out.grad = Matrix(m, logits.cols());
  for (int i = 0; i < m; ++i) {
    const auto row = logits.row(i);
    out.mean += softmax_ce(row, labels[static_cast<std::size_t>(i)]);
    const auto q = softmax(row);
    auto g = out.grad.row(i);
    for (int k = 0; k < logits.cols(); ++k) g[k] = q[static_cast<std::size_t>(k)] / m;
    g[labels[static_cast<std::size_t>(i)]] -= 1.0 / m;
  }
  out.mean /= m;
  return out;
}

HierarchicalLossOutput hierarchical_loss(const Matrix& logits, std::span<const int> subclass_labels,
                                         std::span<const int> class_labels, const AggregationMatrix& aggregation,
                                         double alpha, double beta, double theta_sq_norm) {
  const int m = logits.rows();
  const int n = logits.cols();
  const int num_classes = aggregation.num_classes();
  if (aggregation.num_subclasses() != n) {
    throw std::invalid_argument("aggregation matrix has " + std::to_string(aggregation.num_subclasses()) +
                                " columns but the head outputs " + std::to_string(n));
  }
  if (static_cast<int>(class_labels.size()) != m || static_cast<int>(subclass_labels.size()) != m) {
    throw std::invalid_argument("one subclass and one class label per row is required");
  }
  for (int i = 0; i < m; ++i) {
    const int s = subclass_labels[static_cast<std::size_t>(i)];
    const int c = class_labels[static_cast<std::size_t>(i)];
    if (s < 0 || s >= n || c < 0 || c >= num_classes) throw std::out_of_range("hierarchical loss label out of range");
    if (aggregation.parents.at(static_cast<std::size_t>(s)) != c) {
      throw DataError("class label " + std::to_string(c) + " is not the parent of subclass " + std::to_string(s));
    }
  }

  HierarchicalLossOutput out;
  const CrossEntropy sub = softmax_ce_batch(logits, subclass_labels);
  out.subclass_ce = sub.mean;
  out.grad_logits = sub.grad;
  out.grad_aggregation = Matrix(num_classes, n);

  Matrix class_scores(m, num_classes);
  const auto& w = aggregation.weights;
  for (int i = 0; i < m; ++i) {
    const auto scores = aggregation.apply(logits.row(i));
    std::copy(scores.begin(), scores.end(), class_scores.row(i).begin());
  }
  const CrossEntropy cls = softmax_ce_batch(class_scores, class_labels);
  out.class_ce = cls.mean;

  // Back through the aggregation: dp += alpha * W^T (q - l) / m, dW += alpha * (q - l) p^T / m.
  for (int i = 0; i < m; ++i) {
    const auto gq = cls.grad.row(i);
    const auto p = logits.row(i);
    auto gp = out.grad_logits.row(i);
    for (int j = 0; j < num_classes; ++j) {
      const double g = alpha * gq[j];
      if (g == 0.0) continue;
      for (int s = 0; s < n; ++s) {
        gp[s] += g * w(j, s);
        out.grad_aggregation(j, s) += g * p[s];
      }
    }
  }
  out.decay = 0.5 * beta * theta_sq_norm;
  out.total = out.subclass_ce + alpha * out.class_ce + out.decay;
  return out;
}

}  // namespace semctx
