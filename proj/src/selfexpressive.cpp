#include "dmsc/selfexpressive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace dmsc {

void HyperParams::validate() const {
    if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda1 must be positive");
    if (lambda2 && !(*lambda2 > 0.0)) throw std::invalid_argument("lambda2 must be positive");
    if (!(p > 0.0)) throw std::invalid_argument("p must be positive");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

double HyperParams::lambda2_or_rule(std::size_t num_clusters) const {
    return lambda2 ? *lambda2 : lambda2_rule(num_clusters);
}

double lambda2_rule(std::size_t num_clusters) {
    return std::pow(10.0, static_cast<double>(num_clusters) / 10.0 - 3.0);
}

SelfExpressiveLayer::SelfExpressiveLayer(std::size_t n)
    : coeffs_(Var::parameter(Tensor(Shape{n, n}, 0.0), "self_expressive")) {}

void SelfExpressiveLayer::zero_diagonal() {
    Tensor& c = coeffs_.mutable_value();
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) c[i * n + i] = 0.0;
}

Var pnorm_reg(const Var& coeffs, double p) {
    const Tensor& c = coeffs.value();
    if (p == 2.0) return frobenius(coeffs);

    double s = 0.0;
    for (double v : c.values()) s += std::pow(std::abs(v), p);
    if (p >= 1.0) {
        const double r = p == 1.0 ? s : std::pow(s, 1.0 / p);
        return make_op(Tensor::scalar(r), {coeffs}, [coeffs, p, r](Node& self) {
            if (r == 0.0) return;
            Tensor& g = coeffs.node()->ensure_grad();
            const Tensor& x = coeffs.value();
            const double outer = (*self.grad)[0] * std::pow(r, 1.0 - p);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (x[i] == 0.0) continue;
                const double mag = p == 1.0 ? 1.0 : std::pow(std::abs(x[i]), p - 1.0);
                g[i] += outer * std::copysign(mag, x[i]);
            }
        });
    }
    return make_op(Tensor::scalar(s), {coeffs}, [coeffs, p](Node& self) {
        constexpr double floor = 1e-6;
        Tensor& g = coeffs.node()->ensure_grad();
        const Tensor& x = coeffs.value();
        const double outer = (*self.grad)[0] * p;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] == 0.0) continue;
            const double a = std::max(std::abs(x[i]), floor);
            g[i] += outer * std::copysign(std::pow(a, p - 1.0), x[i]);
        }
    });
}

Var reconstruction_loss(const std::vector<Var>& inputs, const std::vector<Var>& reconstructions) {
    if (inputs.size() != reconstructions.size())
        throw ShapeError("reconstruction loss: " + std::to_string(inputs.size()) + " inputs but " +
                         std::to_string(reconstructions.size()) + " reconstructions");
    if (inputs.empty()) return Var::constant(Tensor::scalar(0.0));
    Var total;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
        if (inputs[m].shape() != reconstructions[m].shape())
            throw ShapeError("reconstruction loss: modality " + std::to_string(m) + " input " +
                             shape_to_string(inputs[m].shape()) + " vs reconstruction " +
                             shape_to_string(reconstructions[m].shape()));
        Var term = frobenius_sq(sub(inputs[m], reconstructions[m]));
        total = m == 0 ? term : add(total, term);
    }
    return total;
}

namespace {

Var self_expressive_loss(const std::vector<Var>& latents, const Var& coeffs, const std::vector<Var>& inputs,
                         const std::vector<Var>& reconstructions, double lambda1, double lambda2, double p) {
    if (coeffs.shape().size() != 2 || coeffs.shape()[0] != coeffs.shape()[1])
        throw ShapeError("self-expressive coefficients must be square, got " + shape_to_string(coeffs.shape()));
    const std::size_t n = coeffs.shape()[0];
    Var expr;
    for (std::size_t m = 0; m < latents.size(); ++m) {
        const Shape& zs = latents[m].shape();
        if (zs.size() != 2 || zs[0] != n)
            throw ShapeError("latent " + std::to_string(m) + " has shape " + shape_to_string(zs) + ", expected " +
                             std::to_string(n) + " rows to match coefficients " + shape_to_string(coeffs.shape()));
        Var term = frobenius_sq(sub(latents[m], matmul(transpose(coeffs), latents[m])));
        expr = m == 0 ? term : add(expr, term);
    }
    for (const Var& x : inputs)
        if (x.shape().empty() || x.shape()[0] != n)
            throw ShapeError("input " + shape_to_string(x.shape()) + " does not have N = " + std::to_string(n));
    Var loss = add(pnorm_reg(coeffs, p), scale(expr, lambda1 / 2.0));
    return add(loss, scale(reconstruction_loss(inputs, reconstructions), lambda2 / 2.0));
}

}  // namespace

Var spatial_loss(const Var& latent, const Var& coeffs, const std::vector<Var>& inputs,
                 const std::vector<Var>& reconstructions, double lambda1, double lambda2, double p) {
    return self_expressive_loss({latent}, coeffs, inputs, reconstructions, lambda1, lambda2, p);
}

Var affinity_loss(const std::vector<Var>& latents, const Var& coeffs, const std::vector<Var>& inputs,
                  const std::vector<Var>& reconstructions, double lambda1, double lambda2, double p) {
    if (latents.empty()) throw ShapeError("affinity loss needs at least one latent");
    return self_expressive_loss(latents, coeffs, inputs, reconstructions, lambda1, lambda2, p);
}

std::vector<Var> bundle_inputs(const ModalityBundle& bundle) {
    std::vector<Var> out;
    for (const auto& t : bundle.modalities) out.push_back(Var::constant(t));
    return out;
}

namespace {

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
    Shape shape = t.shape();
    const std::size_t stride = t.size() / shape[0];
    shape[0] = rows.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(t.data() + rows[i] * stride, stride, out.data() + i * stride);
    return out;
}

void check_finite(double loss, const char* phase, std::size_t epoch) {
    if (!std::isfinite(loss))
        throw NumericError(std::string(phase) + ": non-finite loss at epoch " + std::to_string(epoch));
}

}  // namespace

LossHistory pretrain(const NetworkSpec& spec, NetworkParams& params, const ModalityBundle& bundle,
                     const HyperParams& hp, const BatchCallback& on_batch) {
    hp.validate();
    bundle.validate();
    LossHistory history;
    if (hp.pretrain_epochs == 0) return history;

    const std::size_t n = bundle.size();
    Adam adam(params.all(), AdamOptions{.learning_rate = hp.learning_rate});
    std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < hp.pretrain_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += hp.batch_size) {
            const std::size_t end = std::min(n, start + hp.batch_size);
            std::span<const std::size_t> rows(order.data() + start, end - start);
            std::vector<Var> inputs;
            for (const auto& t : bundle.modalities) inputs.push_back(Var::constant(take_rows(t, rows)));
            auto out = autoencode(params, spec, inputs);
            Var loss = reconstruction_loss(inputs, out.reconstructions);
            check_finite(loss.value().item(), "pretrain", epoch);
            epoch_loss += loss.value().item();
            backward(loss);
            try {
                adam.step();
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " during pretraining epoch " + std::to_string(epoch));
            }
            if (on_batch) on_batch(epoch, rows.size());
        }
        history.push_back(epoch_loss);
    }
    return history;
}

LossHistory train_self_expressive(const NetworkSpec& spec, NetworkParams& params, SelfExpressiveLayer& layer,
                                  const ModalityBundle& bundle, const HyperParams& hp, const StepCallback& on_step) {
    hp.validate();
    bundle.validate();
    const std::size_t n = bundle.size();
    if (layer.size() != n)
        throw ShapeError("self-expressive layer is " + std::to_string(layer.size()) + "x" +
                         std::to_string(layer.size()) + " but the bundle has N = " + std::to_string(n));
    const double lambda2 = hp.lambda2_or_rule(bundle.num_clusters());

    std::vector<Var> trainable = params.all();
    trainable.push_back(layer.coeffs());
    Adam adam(trainable, AdamOptions{.learning_rate = hp.learning_rate});
    AdamState& state = adam.state();
    const std::size_t ci = trainable.size() - 1;

    const std::vector<Var> inputs = bundle_inputs(bundle);
    layer.zero_diagonal();
    LossHistory history;
    for (std::size_t epoch = 0; epoch < hp.train_epochs; ++epoch) {
        auto out = autoencode(params, spec, inputs, &layer.coeffs());
        Var loss = spec.is_affinity()
                       ? affinity_loss(out.latents, layer.coeffs(), inputs, out.reconstructions, hp.lambda1, lambda2,
                                       hp.p)
                       : spatial_loss(out.latents.front(), layer.coeffs(), inputs, out.reconstructions, hp.lambda1,
                                      lambda2, hp.p);
        const double value = loss.value().item();
        check_finite(value, "self-expressive training", epoch);
        history.push_back(value);
        backward(loss);
        try {
            adam.step();
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " during self-expressive epoch " + std::to_string(epoch));
        }
        layer.zero_diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            state.first_moment[ci][i * n + i] = 0.0;
            state.second_moment[ci][i * n + i] = 0.0;
        }
        if (on_step) on_step(epoch, value, layer);
    }
    return history;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'M', 'S', 'C', '0', '0', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error(path + ": truncated checkpoint at byte " + std::to_string(static_cast<long>(in.tellg())));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof kMagic);
    put_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(out, t.rank());
        for (std::size_t d : t.shape()) put_u64(out, d);
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error(path + ": not a DMSC0001 checkpoint");
    NamedTensors out;
    const std::uint64_t count = get_u64(in, path);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string name(get_u64(in, path), '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name.size())))
            throw std::runtime_error(path + ": truncated tensor name");
        Shape shape(get_u64(in, path));
        for (auto& d : shape) d = get_u64(in, path);
        Tensor t(shape);
        if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
            throw std::runtime_error(path + ": truncated data for tensor '" + name + "'");
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

void write_loss_csv(const std::string& path, const LossHistory& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write loss history '" + path + "'");
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) out << i << ',' << history[i] << '\n';
    if (!out) throw std::runtime_error("failed writing loss history '" + path + "'");
}

}  // namespace dmsc
