#pragma once

#include "ddcnn/tensor.hpp"

namespace ddcnn {

/// Categorical cross-entropy on softmax output: -log p[true_class], with
/// the probability clipped to >= 1e-12 before the log.
template <typename T>
double cross_entropy(const Tensor<T>& probabilities, std::size_t true_class);

/// Fused softmax + cross-entropy gradient with respect to the logits:
/// p - onehot(true_class).
template <typename T>
Tensor<T> cross_entropy_softmax_grad(const Tensor<T>& probabilities,
                                     std::size_t true_class);

} // namespace ddcnn
