#pragma once

#include <cstdint>
#include <vector>

#include "dmsc/tensor.hpp"

namespace dmsc {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Per-parameter moment buffers for ADAM with bias correction.
struct AdamState {
    AdamOptions options;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Adam {
public:
    Adam(std::vector<Var> params, AdamOptions options = {});

    /// Applies one update from the current gradients. Parameters without a
    /// gradient are treated as having a zero gradient. Throws NumericError
    /// naming the parameter when a gradient is not finite.
    void step();

    void zero_grad();

    const AdamState& state() const { return state_; }
    AdamState& state() { return state_; }
    const std::vector<Var>& params() const { return params_; }

private:
    std::vector<Var> params_;
    AdamState state_;
};

/// Functional form of a single ADAM update on raw buffers.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                 const AdamOptions& options);

}  // namespace dmsc
