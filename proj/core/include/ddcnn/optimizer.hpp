#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ddcnn/tensor.hpp"

namespace ddcnn {

enum class OptimizerKind { sgd, adam };

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Parameter updater over named tensors. `step` applies one update per call
/// to every parameter that has an entry in `grads`; parameters without a
/// gradient (frozen layers) are left untouched.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam = {});

    void step(std::map<std::string, TensorF>& params,
              const std::map<std::string, TensorF>& grads);

    OptimizerKind kind() const { return kind_; }
    std::int64_t steps_taken() const { return step_count_; }

private:
    OptimizerKind kind_;
    double lr_;
    AdamParams adam_;
    std::int64_t step_count_ = 0;
    std::map<std::string, TensorF> first_moment_;
    std::map<std::string, TensorF> second_moment_;
};

} // namespace ddcnn
