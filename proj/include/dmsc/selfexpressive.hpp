#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmsc/data.hpp"
#include "dmsc/network.hpp"
#include "dmsc/optim.hpp"
#include "dmsc/tensor.hpp"

namespace dmsc {

struct HyperParams {
    double lambda1 = 1.0;
    std::optional<double> lambda2;  ///< absent: lambda2_rule(K)
    double p = 2.0;
    double learning_rate = 1e-3;
    std::size_t pretrain_epochs = 2000;
    std::size_t train_epochs = 1000;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on nonpositive weights or exponent.
    void validate() const;
    double lambda2_or_rule(std::size_t num_clusters) const;
};

/// 10^(K/10 - 3).
double lambda2_rule(std::size_t num_clusters);

/// N x N coefficients with an exactly zero diagonal.
class SelfExpressiveLayer {
public:
    explicit SelfExpressiveLayer(std::size_t n);

    std::size_t size() const { return coeffs_.shape()[0]; }
    const Var& coeffs() const { return coeffs_; }
    Var& coeffs() { return coeffs_; }
    void zero_diagonal();

private:
    Var coeffs_;
};

/// (sum |c|^p)^(1/p) for p >= 1; sum |c|^p for p < 1, whose derivative is
/// evaluated at |c| = 1e-6 for smaller nonzero entries. Gradient at 0 is 0.
Var pnorm_reg(const Var& coeffs, double p);

/// sum_m ||X^m - Xhat^m||_F^2.
Var reconstruction_loss(const std::vector<Var>& inputs, const std::vector<Var>& reconstructions);

/// ||coeffs||_p + lambda1/2 ||Z - coeffs^T Z||_F^2 + lambda2/2 sum_m ||X^m - Xhat^m||_F^2
/// with Z of shape N x D.
Var spatial_loss(const Var& latent, const Var& coeffs, const std::vector<Var>& inputs,
                 const std::vector<Var>& reconstructions, double lambda1, double lambda2, double p);

/// Shared coefficients across M latents; the self-expression term sums over them.
Var affinity_loss(const std::vector<Var>& latents, const Var& coeffs, const std::vector<Var>& inputs,
                  const std::vector<Var>& reconstructions, double lambda1, double lambda2, double p);

/// Per-epoch loss values.
using LossHistory = std::vector<double>;

/// Called once per optimizer step of pretraining with the batch size used.
using BatchCallback = std::function<void(std::size_t epoch, std::size_t batch_rows)>;

/// Reconstruction-only ADAM over seeded shuffled mini-batches; the last
/// partial batch is used. Returns the summed loss of each epoch.
LossHistory pretrain(const NetworkSpec& spec, NetworkParams& params, const ModalityBundle& bundle,
                     const HyperParams& hp, const BatchCallback& on_batch = {});

/// Called after every optimizer step with the epoch index and the loss
/// evaluated before that step.
using StepCallback = std::function<void(std::size_t epoch, double loss, const SelfExpressiveLayer& layer)>;

/// Full-batch ADAM on network weights and coefficients with the spatial or
/// affinity loss, chosen by the spec's latent count. The coefficient
/// diagonal and its ADAM moments are re-zeroed after every step.
LossHistory train_self_expressive(const NetworkSpec& spec, NetworkParams& params, SelfExpressiveLayer& layer,
                                  const ModalityBundle& bundle, const HyperParams& hp,
                                  const StepCallback& on_step = {});

/// Modality tensors of a bundle as constants.
std::vector<Var> bundle_inputs(const ModalityBundle& bundle);

// ---------------------------------------------------------------------------
// Checkpoints: "DMSC0001", u64 count, then per tensor u64 name length, name,
// u64 rank, u64 dims, f64 values; all little-endian.

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

void write_loss_csv(const std::string& path, const LossHistory& history);

}  // namespace dmsc
