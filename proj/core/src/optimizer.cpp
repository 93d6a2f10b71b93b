#include "ddcnn/optimizer.hpp"

#include <cmath>

#include "ddcnn/errors.hpp"

namespace ddcnn {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
    // 0 is allowed and makes every step a no-op (useful as a control)
    if (learning_rate < 0.0) {
        throw ConfigError("learning rate must be non-negative");
    }
}

void Optimizer::step(std::map<std::string, TensorF>& params,
                     const std::map<std::string, TensorF>& grads) {
    ++step_count_;
    for (const auto& [name, grad] : grads) {
        auto it = params.find(name);
        if (it == params.end()) {
            throw ShapeError("optimizer has a gradient for unknown parameter '" +
                             name + "'");
        }
        TensorF& p = it->second;
        if (!p.same_shape(grad)) {
            throw ShapeError("gradient shape " + grad.shape_string() +
                             " does not match parameter '" + name + "' " +
                             p.shape_string());
        }

        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] -= static_cast<float>(lr_) * grad[i];
            }
            continue;
        }

        auto& m = first_moment_.try_emplace(name, TensorF(p.dims())).first->second;
        auto& v = second_moment_.try_emplace(name, TensorF(p.dims())).first->second;
        const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grad[i];
            const double mi = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g;
            const double vi = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double m_hat = mi / bc1;
            const double v_hat = vi / bc2;
            p[i] -= static_cast<float>(lr_ * m_hat / (std::sqrt(v_hat) + adam_.epsilon));
        }
    }
}

} // namespace ddcnn
