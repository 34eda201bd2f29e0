#pragma once

#include <span>
#include <vector>

#include "semctx/hierarchy.hpp"
#include "semctx/tensor.hpp"

namespace semctx {

/// Softmax with max subtraction.
std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[label].
double softmax_ce(std::span<const double> logits, int label);

struct CrossEntropy {
  double mean = 0.0;
  /// d mean / d logits: (softmax - onehot) / m.
  Matrix grad;
};

CrossEntropy softmax_ce_batch(const Matrix& logits, std::span<const int> labels);

struct HierarchicalLossOutput {
  double total = 0.0;
  double subclass_ce = 0.0;
  double class_ce = 0.0;
  double decay = 0.0;
  /// d total / d subclass logits.
  Matrix grad_logits;
  /// d total / d W, excluding weight decay on W.
  Matrix grad_aggregation;
};

/// Joint subclass and class loss for a batch of subclass logits p (m x n):
///   mean_i CE(p_i, subclass_i) + alpha * mean_i CE(W p_i, class_i) + beta / 2 * theta_sq_norm.
/// Throws DataError when a class label is not the parent of its subclass label.
HierarchicalLossOutput hierarchical_loss(const Matrix& logits, std::span<const int> subclass_labels,
                                         std::span<const int> class_labels, const AggregationMatrix& aggregation,
                                         double alpha, double beta, double theta_sq_norm);

}  // namespace semctx
