#include "ddcnn/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddcnn {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<MatRM<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const MatRM<T>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapConstVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weights,
                       const Tensor<T>& bias, const ConvParams& p) {
    if (input.rank() != 3) {
        throw ShapeError("conv2d input must be rank 3 [C,H,W], got " +
                         input.shape_string());
    }
    if (weights.rank() != 4) {
        throw ShapeError("conv2d weights must be rank 4 [O,C,kh,kw], got " +
                         weights.shape_string());
    }
    if (bias.rank() != 1) {
        throw ShapeError("conv2d bias must be rank 1, got " + bias.shape_string());
    }
    if (p.stride < 1) throw ConfigError("conv2d stride must be >= 1");
    if (p.padding < 0) throw ConfigError("conv2d padding must be >= 0");
    const auto C = static_cast<std::size_t>(p.in_channels);
    const auto O = static_cast<std::size_t>(p.out_channels);
    if (input.dim(0) != C) {
        throw ShapeError("conv2d input has " + std::to_string(input.dim(0)) +
                         " channels, params expect " + std::to_string(p.in_channels));
    }
    if (weights.dim(0) != O || weights.dim(1) != C ||
        weights.dim(2) != static_cast<std::size_t>(p.kernel_h) ||
        weights.dim(3) != static_cast<std::size_t>(p.kernel_w)) {
        throw ShapeError("conv2d weight shape " + weights.shape_string() +
                         " does not match params");
    }
    if (bias.dim(0) != O) {
        throw ShapeError("conv2d bias length " + std::to_string(bias.dim(0)) +
                         " does not match out_channels " + std::to_string(p.out_channels));
    }
}

// col is [C*kh*kw, outH*outW]; out-of-bounds input reads as 0.
template <typename T>
void im2col(const Tensor<T>& input, const ConvParams& p, int out_h, int out_w,
            AlignedVector<T>& col) {
    const int C = p.in_channels;
    const int H = static_cast<int>(input.dim(1));
    const int W = static_cast<int>(input.dim(2));
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    col.assign(static_cast<std::size_t>(C) * p.kernel_h * p.kernel_w * plane, T{});

    const T* in = input.data();
    T* dst = col.data();
    for (int c = 0; c < C; ++c) {
        const T* in_c = in + static_cast<std::size_t>(c) * H * W;
        for (int ky = 0; ky < p.kernel_h; ++ky) {
            for (int kx = 0; kx < p.kernel_w; ++kx) {
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * p.stride + ky - p.padding;
                    T* row = dst + static_cast<std::size_t>(oy) * out_w;
                    if (iy < 0 || iy >= H) continue; // stays zero
                    const T* src = in_c + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * p.stride + kx - p.padding;
                        if (ix >= 0 && ix < W) row[ox] = src[ix];
                    }
                }
                dst += plane;
            }
        }
    }
}

// Scatter-add of a column matrix back onto the input grid.
template <typename T>
void col2im(const AlignedVector<T>& col, const ConvParams& p, int H, int W,
            int out_h, int out_w, Tensor<T>& grad_input) {
    const int C = p.in_channels;
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    const T* src = col.data();
    T* out = grad_input.data();
    for (int c = 0; c < C; ++c) {
        T* out_c = out + static_cast<std::size_t>(c) * H * W;
        for (int ky = 0; ky < p.kernel_h; ++ky) {
            for (int kx = 0; kx < p.kernel_w; ++kx) {
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * p.stride + ky - p.padding;
                    if (iy < 0 || iy >= H) continue;
                    const T* row = src + static_cast<std::size_t>(oy) * out_w;
                    T* dst = out_c + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * p.stride + kx - p.padding;
                        if (ix >= 0 && ix < W) dst[ix] += row[ox];
                    }
                }
                src += plane;
            }
        }
    }
}

} // namespace

int ConvParams::output_dim(int in, int kernel) const {
    const int out = (in + 2 * padding - kernel) / stride + 1;
    if (in + 2 * padding < kernel || out < 1) {
        throw ConfigError("convolution output collapses below 1 "
                          "(input " + std::to_string(in) + ", kernel " +
                          std::to_string(kernel) + ", stride " + std::to_string(stride) +
                          ", padding " + std::to_string(padding) + ")");
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvParams& p) {
    check_conv_shapes(input, weights, bias, p);
    const int out_h = p.output_h(static_cast<int>(input.dim(1)));
    const int out_w = p.output_w(static_cast<int>(input.dim(2)));
    const std::size_t O = static_cast<std::size_t>(p.out_channels);
    const std::size_t K = static_cast<std::size_t>(p.in_channels) * p.kernel_h * p.kernel_w;
    const std::size_t N = static_cast<std::size_t>(out_h) * out_w;

    AlignedVector<T> col;
    im2col(input, p, out_h, out_w, col);

    Tensor<T> out({O, static_cast<std::size_t>(out_h), static_cast<std::size_t>(out_w)});
    MapConstMat<T> w_mat(weights.data(), static_cast<Eigen::Index>(O),
                         static_cast<Eigen::Index>(K));
    MapConstMat<T> col_mat(col.data(), static_cast<Eigen::Index>(K),
                           static_cast<Eigen::Index>(N));
    MapMat<T> out_mat(out.data(), static_cast<Eigen::Index>(O),
                      static_cast<Eigen::Index>(N));
    out_mat.noalias() = w_mat * col_mat;
    for (std::size_t o = 0; o < O; ++o) {
        out_mat.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& bias, const ConvParams& p) {
    check_conv_shapes(input, weights, bias, p);
    const int H = static_cast<int>(input.dim(1));
    const int W = static_cast<int>(input.dim(2));
    const int out_h = p.output_h(H);
    const int out_w = p.output_w(W);

    Tensor<T> out({static_cast<std::size_t>(p.out_channels),
                   static_cast<std::size_t>(out_h), static_cast<std::size_t>(out_w)});
    for (int o = 0; o < p.out_channels; ++o) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                T acc = bias[static_cast<std::size_t>(o)];
                for (int c = 0; c < p.in_channels; ++c) {
                    for (int ky = 0; ky < p.kernel_h; ++ky) {
                        for (int kx = 0; kx < p.kernel_w; ++kx) {
                            const int iy = oy * p.stride + ky - p.padding;
                            const int ix = ox * p.stride + kx - p.padding;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += input(static_cast<std::size_t>(c),
                                         static_cast<std::size_t>(iy),
                                         static_cast<std::size_t>(ix)) *
                                   weights(static_cast<std::size_t>(o),
                                           static_cast<std::size_t>(c),
                                           static_cast<std::size_t>(ky),
                                           static_cast<std::size_t>(kx));
                        }
                    }
                }
                out(static_cast<std::size_t>(o), static_cast<std::size_t>(oy),
                    static_cast<std::size_t>(ox)) = acc;
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weights, const ConvParams& p) {
    Tensor<T> bias({static_cast<std::size_t>(p.out_channels)});
    check_conv_shapes(input, weights, bias, p);
    const int H = static_cast<int>(input.dim(1));
    const int W = static_cast<int>(input.dim(2));
    const int out_h = p.output_h(H);
    const int out_w = p.output_w(W);
    const std::size_t O = static_cast<std::size_t>(p.out_channels);
    const std::size_t K = static_cast<std::size_t>(p.in_channels) * p.kernel_h * p.kernel_w;
    const std::size_t N = static_cast<std::size_t>(out_h) * out_w;
    if (grad_out.rank() != 3 || grad_out.dim(0) != O ||
        grad_out.dim(1) != static_cast<std::size_t>(out_h) ||
        grad_out.dim(2) != static_cast<std::size_t>(out_w)) {
        throw ShapeError("conv2d grad_out shape " + grad_out.shape_string() +
                         " does not match forward output");
    }

    ConvGrads<T> grads{Tensor<T>(input.dims()), Tensor<T>(weights.dims()),
                       Tensor<T>({O})};

    MapConstMat<T> g_mat(grad_out.data(), static_cast<Eigen::Index>(O),
                         static_cast<Eigen::Index>(N));

    for (std::size_t o = 0; o < O; ++o) {
        grads.bias[o] = g_mat.row(static_cast<Eigen::Index>(o)).sum();
    }

    AlignedVector<T> col;
    im2col(input, p, out_h, out_w, col);
    MapConstMat<T> col_mat(col.data(), static_cast<Eigen::Index>(K),
                           static_cast<Eigen::Index>(N));
    MapMat<T> gw_mat(grads.weights.data(), static_cast<Eigen::Index>(O),
                     static_cast<Eigen::Index>(K));
    gw_mat.noalias() = g_mat * col_mat.transpose();

    MapConstMat<T> w_mat(weights.data(), static_cast<Eigen::Index>(O),
                         static_cast<Eigen::Index>(K));
    AlignedVector<T> gcol(K * N);
    MapMat<T> gcol_mat(gcol.data(), static_cast<Eigen::Index>(K),
                       static_cast<Eigen::Index>(N));
    gcol_mat.noalias() = w_mat.transpose() * g_mat;
    col2im(gcol, p, H, W, out_h, out_w, grads.input);
    return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input) {
    if (input.rank() != 3) {
        throw ShapeError("maxpool input must be rank 3 [C,H,W], got " +
                         input.shape_string());
    }
    const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const std::size_t out_h = (H + 1) / 2, out_w = (W + 1) / 2;

    PoolResult<T> result{Tensor<T>({C, out_h, out_w}),
                         std::vector<std::size_t>(C * out_h * out_w)};
    std::size_t k = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        // replicate the last row/column for odd extents
                        const std::size_t iy = std::min(oy * 2 + dy, H - 1);
                        const std::size_t ix = std::min(ox * 2 + dx, W - 1);
                        const std::size_t idx = (c * H + iy) * W + ix;
                        const T v = input[idx];
                        if (v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                result.output[k] = best;
                result.argmax[k] = best_idx;
                ++k;
            }
        }
    }
    return result;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out,
                             const std::vector<std::size_t>& argmax,
                             const std::vector<std::size_t>& input_dims) {
    if (grad_out.size() != argmax.size()) {
        throw ShapeError("maxpool backward: grad_out size does not match argmax map");
    }
    Tensor<T> grad_input(input_dims);
    for (std::size_t k = 0; k < argmax.size(); ++k) {
        grad_input[argmax[k]] += grad_out[k];
    }
    return grad_input;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights,
                        const Tensor<T>& bias) {
    if (input.rank() != 1) {
        throw ShapeError("dense input must be rank 1, got " + input.shape_string());
    }
    if (weights.rank() != 2 || bias.rank() != 1 || weights.dim(0) != bias.dim(0) ||
        weights.dim(1) != input.dim(0)) {
        throw ShapeError("dense shapes inconsistent: input " + input.shape_string() +
                         ", weights " + weights.shape_string() + ", bias " +
                         bias.shape_string());
    }
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    Tensor<T> out({m});
    MapConstMat<T> w(weights.data(), static_cast<Eigen::Index>(m),
                     static_cast<Eigen::Index>(n));
    MapConstVec<T> x(input.data(), static_cast<Eigen::Index>(n));
    MapConstVec<T> b(bias.data(), static_cast<Eigen::Index>(m));
    MapVec<T> y(out.data(), static_cast<Eigen::Index>(m));
    y.noalias() = w * x + b;
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weights) {
    if (grad_out.rank() != 1 || weights.rank() != 2 ||
        grad_out.dim(0) != weights.dim(0) || input.dim(0) != weights.dim(1)) {
        throw ShapeError("dense backward shapes inconsistent");
    }
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    DenseGrads<T> grads{Tensor<T>({n}), Tensor<T>({m, n}), grad_out};
    MapConstMat<T> w(weights.data(), static_cast<Eigen::Index>(m),
                     static_cast<Eigen::Index>(n));
    MapConstVec<T> g(grad_out.data(), static_cast<Eigen::Index>(m));
    MapConstVec<T> x(input.data(), static_cast<Eigen::Index>(n));
    MapVec<T> gi(grads.input.data(), static_cast<Eigen::Index>(n));
    MapMat<T> gw(grads.weights.data(), static_cast<Eigen::Index>(m),
                 static_cast<Eigen::Index>(n));
    gi.noalias() = w.transpose() * g;
    gw.noalias() = g * x.transpose();
    return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.dims());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > T{0} ? input[i] : T{0};
    }
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
    if (!grad_out.same_shape(input)) {
        throw ShapeError("relu backward: grad and input shapes differ");
    }
    Tensor<T> out(input.dims());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > T{0} ? grad_out[i] : T{0};
    }
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 1) {
        throw ShapeError("softmax input must be rank 1, got " + logits.shape_string());
    }
    Tensor<T> out(logits.dims());
    T max = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) max = std::max(max, logits[i]);
    T sum{};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max);
        sum += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
    return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_probs, const Tensor<T>& probs) {
    if (!grad_probs.same_shape(probs)) {
        throw ShapeError("softmax backward: shapes differ");
    }
    T dot{};
    for (std::size_t i = 0; i < probs.size(); ++i) dot += grad_probs[i] * probs[i];
    Tensor<T> out(probs.dims());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out[i] = probs[i] * (grad_probs[i] - dot);
    }
    return out;
}

template <typename T>
DropoutResult<T> dropout_with_mask(const Tensor<T>& input, double rate,
                                   RunMode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    }
    DropoutResult<T> result{Tensor<T>(input.dims()),
                            std::vector<std::uint8_t>(input.size(), 1)};
    if (mode == RunMode::infer || rate == 0.0) {
        result.output = input;
        return result;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (rng.uniform() < rate) {
            result.keep_mask[i] = 0;
            result.output[i] = T{0};
        } else {
            result.output[i] = input[i] * scale;
        }
    }
    return result;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, RunMode mode, Rng& rng) {
    return dropout_with_mask(input, rate, mode, rng).output;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out,
                           const std::vector<std::uint8_t>& keep_mask,
                           double rate) {
    if (grad_out.size() != keep_mask.size()) {
        throw ShapeError("dropout backward: mask size does not match gradient");
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> out(grad_out.dims());
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        out[i] = keep_mask[i] ? grad_out[i] * scale : T{0};
    }
    return out;
}

template <typename T>
Tensor<T> batchnorm_inference(const Tensor<T>& input, const Tensor<T>& gamma,
                              const Tensor<T>& beta, const Tensor<T>& running_mean,
                              const Tensor<T>& running_var, double eps) {
    if (input.rank() != 3) {
        throw ShapeError("batchnorm input must be rank 3 [C,H,W]");
    }
    const std::size_t C = input.dim(0);
    for (const Tensor<T>* t : {&gamma, &beta, &running_mean, &running_var}) {
        if (t->rank() != 1 || t->dim(0) != C) {
            throw ShapeError("batchnorm per-channel parameter length must equal " +
                             std::to_string(C));
        }
    }
    const std::size_t plane = input.dim(1) * input.dim(2);
    Tensor<T> out(input.dims());
    for (std::size_t c = 0; c < C; ++c) {
        if (running_var[c] < T{0}) {
            throw DataError("batchnorm running variance is negative for channel " +
                            std::to_string(c));
        }
        const T scale = gamma[c] / static_cast<T>(
                            std::sqrt(static_cast<double>(running_var[c]) + eps));
        const T shift = beta[c] - running_mean[c] * scale;
        const T* src = input.data() + c * plane;
        T* dst = out.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
    }
    return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& input) {
    return input.reshaped({input.size()});
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& input) {
    if (input.rank() != 3) {
        throw ShapeError("global average pool input must be rank 3 [C,H,W]");
    }
    const std::size_t C = input.dim(0);
    const std::size_t plane = input.dim(1) * input.dim(2);
    Tensor<T> out({C});
    for (std::size_t c = 0; c < C; ++c) {
        T sum{};
        const T* src = input.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += src[i];
        out[c] = sum / static_cast<T>(plane);
    }
    return out;
}

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& grad_out,
                                       const std::vector<std::size_t>& input_dims) {
    if (input_dims.size() != 3 || grad_out.rank() != 1 ||
        grad_out.dim(0) != input_dims[0]) {
        throw ShapeError("global average pool backward: inconsistent shapes");
    }
    const std::size_t plane = input_dims[1] * input_dims[2];
    Tensor<T> grad_input(input_dims);
    for (std::size_t c = 0; c < input_dims[0]; ++c) {
        const T g = grad_out[c] / static_cast<T>(plane);
        T* dst = grad_input.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = g;
    }
    return grad_input;
}

#define DDCNN_INSTANTIATE_KERNELS(T)                                               \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,       \
                                         const Tensor<T>&, const ConvParams&);     \
    template Tensor<T> conv2d_forward_naive<T>(const Tensor<T>&, const Tensor<T>&, \
                                               const Tensor<T>&, const ConvParams&); \
    template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,   \
                                             const Tensor<T>&, const ConvParams&); \
    template PoolResult<T> maxpool2d<T>(const Tensor<T>&);                         \
    template Tensor<T> maxpool2d_backward<T>(const Tensor<T>&,                     \
                                             const std::vector<std::size_t>&,      \
                                             const std::vector<std::size_t>&);     \
    template Tensor<T> dense_forward<T>(const Tensor<T>&, const Tensor<T>&,        \
                                        const Tensor<T>&);                         \
    template DenseGrads<T> dense_backward<T>(const Tensor<T>&, const Tensor<T>&,   \
                                             const Tensor<T>&);                    \
    template Tensor<T> relu<T>(const Tensor<T>&);                                  \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> softmax<T>(const Tensor<T>&);                               \
    template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&);    \
    template DropoutResult<T> dropout_with_mask<T>(const Tensor<T>&, double,       \
                                                   RunMode, Rng&);                 \
    template Tensor<T> dropout<T>(const Tensor<T>&, double, RunMode, Rng&);        \
    template Tensor<T> dropout_backward<T>(const Tensor<T>&,                       \
                                           const std::vector<std::uint8_t>&,       \
                                           double);                                \
    template Tensor<T> batchnorm_inference<T>(const Tensor<T>&, const Tensor<T>&,  \
                                              const Tensor<T>&, const Tensor<T>&,  \
                                              const Tensor<T>&, double);           \
    template Tensor<T> flatten<T>(const Tensor<T>&);                               \
    template Tensor<T> global_average_pool<T>(const Tensor<T>&);                   \
    template Tensor<T> global_average_pool_backward<T>(                            \
        const Tensor<T>&, const std::vector<std::size_t>&);

DDCNN_INSTANTIATE_KERNELS(float)
DDCNN_INSTANTIATE_KERNELS(double)

#undef DDCNN_INSTANTIATE_KERNELS

} // namespace ddcnn
