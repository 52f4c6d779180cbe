#include "dmsc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dmsc {

double grad_check(const std::function<Var()>& loss_fn, std::vector<Var> params, GradCheckOptions options) {
    for (auto& p : params) p.zero_grad();
    Var loss = loss_fn();
    backward(loss);

    std::vector<Tensor> analytic;
    for (auto& p : params) analytic.push_back(p.grad() ? *p.grad() : Tensor(p.shape(), 0.0));

    const double h = options.step;
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& x = params[k].mutable_value();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double orig = x[i];
            if (options.kink_guard > 0.0 && std::abs(orig) < options.kink_guard) continue;
            x[i] = orig + h;
            const double up = loss_fn().value().item();
            x[i] = orig - h;
            const double down = loss_fn().value().item();
            x[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    return worst;
}

}  // namespace dmsc
