#include "ddcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ddcnn {

GradCheckReport finite_difference_check(
    const std::function<double(const std::vector<TensorD>&)>& scalar_fn,
    std::vector<TensorD> inputs, const std::vector<TensorD>& analytic_grads,
    double tolerance, double h) {
    if (inputs.size() != analytic_grads.size()) {
        throw ShapeError("gradient check: inputs and analytic gradients differ in count");
    }
    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t].same_shape(analytic_grads[t])) {
            throw ShapeError("gradient check: gradient shape does not match input " +
                             inputs[t].shape_string());
        }
        for (std::size_t i = 0; i < inputs[t].size(); ++i) {
            const double saved = inputs[t][i];
            inputs[t][i] = saved + h;
            const double plus = scalar_fn(inputs);
            inputs[t][i] = saved - h;
            const double minus = scalar_fn(inputs);
            inputs[t][i] = saved;

            const double numeric = (plus - minus) / (2.0 * h);
            const double analytic = analytic_grads[t][i];
            const double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
            report.max_rel_error =
                std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
            ++report.elements_checked;
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

} // namespace ddcnn
