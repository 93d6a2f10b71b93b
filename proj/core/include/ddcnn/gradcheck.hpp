#pragma once

#include <functional>
#include <vector>

#include "ddcnn/tensor.hpp"

namespace ddcnn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t elements_checked = 0;
    bool passed = false;
};

/// Central finite-difference verification of analytic gradients, f64 only.
///
/// `scalar_fn` evaluates the scalar loss at a full set of inputs;
/// `analytic_grads[i]` must hold d(loss)/d(inputs[i]) with the shape of
/// inputs[i]. Each element is perturbed by +-h and the symmetric difference
/// quotient is compared against the analytic value with relative error
/// |a - n| / max(1e-6, |a| + |n|).
GradCheckReport finite_difference_check(
    const std::function<double(const std::vector<TensorD>&)>& scalar_fn,
    std::vector<TensorD> inputs, const std::vector<TensorD>& analytic_grads,
    double tolerance, double h = 1e-5);

} // namespace ddcnn
