#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/tensor.hpp"

namespace lbc {

enum class LossKind { kCrossEntropy, kMse };

template <typename Real>
struct LossResult {
  double value = 0.0;
  Tensor<Real> grad;  // d(loss)/d(logits), same shape as logits
};

/// Softmax cross-entropy over integer class labels, mean-reduced over the batch.
template <typename Real>
LossResult<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("cross_entropy expects (batch, classes) logits, got " +
                                shape_str(logits.shape));
  }
  const std::size_t batch = logits.extent(0);
  const std::size_t classes = logits.extent(1);
  if (labels.size() != batch) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(batch));
  }

  LossResult<Real> out;
  out.grad = zeros_like(logits);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " at sample " +
                              std::to_string(b) + " outside [0, " + std::to_string(classes) + ")");
    }
    // log-sum-exp with max shift
    double mx = logits.at(b, 0);
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, static_cast<double>(logits.at(b, k)));
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(static_cast<double>(logits.at(b, k)) - mx);
    const double lse = mx + std::log(sum);
    total += lse - static_cast<double>(logits.at(b, static_cast<std::size_t>(y)));
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(static_cast<double>(logits.at(b, k)) - lse);
      double g = p / static_cast<double>(batch);
      if (k == static_cast<std::size_t>(y)) g -= 1.0 / static_cast<double>(batch);
      out.grad.at(b, k) = static_cast<Real>(g);
    }
  }
  out.value = total / static_cast<double>(batch);
  return out;
}

/// Mean squared error over all elements.
template <typename Real>
LossResult<Real> mse(const Tensor<Real>& pred, const Tensor<Real>& target) {
  if (!pred.same_shape(target)) {
    throw std::invalid_argument("mse: prediction shape " + shape_str(pred.shape) +
                                " vs target shape " + shape_str(target.shape));
  }
  LossResult<Real> out;
  out.grad = zeros_like(pred);
  const double n = static_cast<double>(pred.numel());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    total += d * d;
    out.grad.data[i] = static_cast<Real>(2.0 * d / n);
  }
  out.value = total / n;
  return out;
}

template <typename Real>
int argmax_row(const Tensor<Real>& logits, std::size_t row) {
  int best = 0;
  for (std::size_t k = 1; k < logits.extent(1); ++k) {
    if (logits.at(row, k) > logits.at(row, static_cast<std::size_t>(best))) best = static_cast<int>(k);
  }
  return best;
}

template <typename Real>
double accuracy(const Tensor<Real>& logits, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < logits.extent(0); ++b) {
    if (argmax_row(logits, b) == labels[b]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace lbc
