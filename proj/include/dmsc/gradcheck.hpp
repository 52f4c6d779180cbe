#pragma once

#include <functional>
#include <vector>

#include "dmsc/tensor.hpp"

namespace dmsc {

struct GradCheckOptions {
    double step = 1e-5;
    /// Coordinates with |x| below this are skipped (kinks of relu, |.|).
    /// Zero disables the filter.
    double kink_guard = 0.0;
};

/// Compares reverse-mode gradients of `loss_fn` with respect to `params`
/// against central differences. Returns the max over coordinates of
/// |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Var()>& loss_fn, std::vector<Var> params, GradCheckOptions options = {});

}  // namespace dmsc
