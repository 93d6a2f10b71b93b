#pragma once

#include <vector>

#include "ddcnn/graph.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

/// Weight-normalized average of the members' softmax outputs. An empty
/// weight vector means uniform weighting; weights must be non-negative and
/// not all zero. All members must share the input contract.
TensorF ensemble_predict(const std::vector<const ModelGraph*>& models,
                         const std::vector<double>& weights, const TensorF& input);

} // namespace ddcnn
