#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "ddcnn/errors.hpp"

namespace ddcnn {

/// 64-byte-aligned storage. A fixed alignment keeps SIMD matrix kernels on
/// the same code path for every allocation, which makes training runs
/// bit-reproducible.
template <typename T, std::size_t Alignment = 64>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Alignment>;
    };

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t bytes =
            (n * sizeof(T) + Alignment - 1) / Alignment * Alignment;
        void* p = std::aligned_alloc(Alignment, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U, Alignment>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor of rank 1..4.
///
/// The single value type of the engine: images, feature maps, weights,
/// logits and probability vectors are all Tensors. f32 is the training
/// type; f64 is used for gradient checking.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
        : dims_(std::move(dims)), data_(checked_size(dims_), fill) {}

    Tensor(std::vector<std::size_t> dims, AlignedVector<T> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (checked_size(dims_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(dims_));
        }
    }

    Tensor(std::vector<std::size_t> dims, const std::vector<T>& data)
        : dims_(std::move(dims)), data_(data.begin(), data.end()) {
        if (checked_size(dims_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(dims_));
        }
    }

    Tensor(std::vector<std::size_t> dims, std::initializer_list<T> data)
        : dims_(std::move(dims)), data_(data.begin(), data.end()) {
        if (checked_size(dims_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(dims_));
        }
    }

    std::size_t rank() const { return dims_.size(); }
    std::size_t dim(std::size_t i) const { return dims_[i]; }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    AlignedVector<T>& values() { return data_; }
    const AlignedVector<T>& values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    T& operator()(std::size_t i) { return data_[i]; }
    const T& operator()(std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t i, std::size_t j) {
        return data_[i * dims_[1] + j];
    }
    const T& operator()(std::size_t i, std::size_t j) const {
        return data_[i * dims_[1] + j];
    }

    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * dims_[1] + j) * dims_[2] + k];
    }

    T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k,
                        std::size_t l) const {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }

    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        AlignedVector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out[i] = static_cast<U>(data_[i]);
        }
        return Tensor<U>(dims_, std::move(out));
    }

    Tensor reshaped(std::vector<std::size_t> new_dims) const {
        Tensor t(std::move(new_dims), data_);
        return t;
    }

    static std::string shape_string(const std::vector<std::size_t>& dims) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) os << "x";
            os << dims[i];
        }
        os << "]";
        return os.str();
    }

    std::string shape_string() const { return shape_string(dims_); }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& dims) {
        if (dims.empty() || dims.size() > 4) {
            throw ShapeError("tensor rank must be 1..4, got " +
                             std::to_string(dims.size()));
        }
        std::size_t n = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw ShapeError("tensor dimension must be positive");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> dims_;
    AlignedVector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

} // namespace ddcnn
