#pragma once

#include <cstdint>
#include <vector>

#include "ddcnn/rng.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

struct ConvParams {
    int kernel_h = 3;
    int kernel_w = 3;
    int in_channels = 1;
    int out_channels = 1;
    int stride = 1;
    int padding = 0;

    // floor((in + 2*padding - kernel)/stride) + 1; throws ConfigError if < 1.
    int output_dim(int in, int kernel) const;
    int output_h(int in_h) const { return output_dim(in_h, kernel_h); }
    int output_w(int in_w) const { return output_dim(in_w, kernel_w); }

    static ConvParams same_3x3(int in_channels, int out_channels) {
        return ConvParams{3, 3, in_channels, out_channels, 1, 1};
    }
};

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
struct PoolResult {
    Tensor<T> output;
    // Flat index into the input tensor of the window maximum, one per
    // output element; ties go to the first maximal element in row-major
    // window order, which makes the backward pass deterministic.
    std::vector<std::size_t> argmax;
};

template <typename T>
struct DropoutResult {
    Tensor<T> output;
    std::vector<std::uint8_t> keep_mask; // 1 = kept, 0 = zeroed
};

enum class RunMode { train, infer };

// Convolution. The im2col + matrix-multiply path is the default; the naive
// quadruple-loop path is kept permanently as its cross-check.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvParams& params);

template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& bias, const ConvParams& params);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weights, const ConvParams& params);

// 2x2/stride-2 max pooling; odd trailing rows/columns are handled by
// replicating the last row/column.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out,
                             const std::vector<std::size_t>& argmax,
                             const std::vector<std::size_t>& input_dims);

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights,
                        const Tensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weights);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

// Gradient at exactly 0 is defined as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input);

// Numerically stable (max-subtracted) softmax; output is strictly positive
// and sums to 1.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// Jacobian-vector product of softmax given its own output.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_probs, const Tensor<T>& probs);

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); infer mode is the identity.
template <typename T>
DropoutResult<T> dropout_with_mask(const Tensor<T>& input, double rate,
                                   RunMode mode, Rng& rng);

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, RunMode mode, Rng& rng);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out,
                           const std::vector<std::uint8_t>& keep_mask,
                           double rate);

template <typename T>
Tensor<T> batchnorm_inference(const Tensor<T>& input, const Tensor<T>& gamma,
                              const Tensor<T>& beta, const Tensor<T>& running_mean,
                              const Tensor<T>& running_var, double eps = 1e-5);

template <typename T>
Tensor<T> flatten(const Tensor<T>& input);

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& input);

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& grad_out,
                                       const std::vector<std::size_t>& input_dims);

} // namespace ddcnn
