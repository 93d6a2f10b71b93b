#include "ddcnn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ddcnn/errors.hpp"

namespace ddcnn {

template <typename T>
double cross_entropy(const Tensor<T>& probabilities, std::size_t true_class) {
    if (probabilities.rank() != 1) {
        throw ShapeError("cross_entropy expects a rank-1 probability vector");
    }
    if (true_class >= probabilities.size()) {
        throw DataError("cross_entropy class index " + std::to_string(true_class) +
                        " is out of range for " + std::to_string(probabilities.size()) +
                        " classes");
    }
    const double p = std::max(1e-12, static_cast<double>(probabilities[true_class]));
    return -std::log(p);
}

template <typename T>
Tensor<T> cross_entropy_softmax_grad(const Tensor<T>& probabilities,
                                     std::size_t true_class) {
    if (probabilities.rank() != 1) {
        throw ShapeError("cross_entropy expects a rank-1 probability vector");
    }
    if (true_class >= probabilities.size()) {
        throw DataError("cross_entropy class index " + std::to_string(true_class) +
                        " is out of range for " + std::to_string(probabilities.size()) +
                        " classes");
    }
    Tensor<T> grad = probabilities;
    grad[true_class] -= T{1};
    return grad;
}

template double cross_entropy<float>(const TensorF&, std::size_t);
template double cross_entropy<double>(const TensorD&, std::size_t);
template TensorF cross_entropy_softmax_grad<float>(const TensorF&, std::size_t);
template TensorD cross_entropy_softmax_grad<double>(const TensorD&, std::size_t);

} // namespace ddcnn
