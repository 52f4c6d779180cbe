#include "dmsc/optim.hpp"

#include <cmath>

namespace dmsc {

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)) {
    if (!(options.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
    state_.options = options;
    for (const auto& p : params_) {
        state_.first_moment.emplace_back(p.shape(), 0.0);
        state_.second_moment.emplace_back(p.shape(), 0.0);
    }
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                 const AdamOptions& o) {
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
}

void Adam::step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const auto& g = params_[k].grad();
        if (!g) continue;
        for (double x : g->values())
            if (!std::isfinite(x))
                throw NumericError("non-finite gradient in parameter '" + params_[k].name() + "'");
    }
    ++state_.step;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Var& p = params_[k];
        const Tensor zero(p.shape(), 0.0);
        const Tensor& g = p.grad() ? *p.grad() : zero;
        adam_update(p.mutable_value(), g, state_.first_moment[k], state_.second_moment[k], state_.step,
                    state_.options);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace dmsc
