#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmsc/tensor.hpp"

namespace dmsc {

enum class LayerKind { Conv, Deconv, Fusion };
enum class FusionKind { Sum, Max, Concat };
enum class Activation { Default, Relu, Linear };

std::string to_string(FusionKind kind);
FusionKind parse_fusion_kind(const std::string& text);

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    std::vector<std::string> inputs;
    std::size_t kh = 0, kw = 0;
    std::optional<std::size_t> din;  ///< absent: inferred from the upstream channel count
    std::size_t dout = 0;
    std::size_t stride = 1;
    FusionKind fusion = FusionKind::Concat;
    Activation activation = Activation::Default;
};

/// Per-sample shape of a modality input.
struct InputSpec {
    std::string name;
    std::size_t height = 0, width = 0, channels = 0;
};

/// Declarative layer graph. Sources are the modality inputs; spatial fusion
/// specs declare one latent, affinity specs one latent per modality.
/// Decoder layers that read a latent name consume the self-expressed latent
/// when a self-expressive layer is attached.
struct NetworkSpec {
    std::string name;
    std::vector<InputSpec> inputs;
    std::vector<LayerSpec> layers;
    std::vector<std::string> latents;
    std::map<std::string, std::string> recon;  ///< modality name -> producing layer

    std::size_t num_modalities() const { return inputs.size(); }
    bool is_affinity() const { return latents.size() > 1; }
    const LayerSpec* find_layer(const std::string& name) const;
};

class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parses the line-oriented architecture format:
///
///   input  <modality> <H> <W> <C>
///   <name> conv|deconv <input> <kh> <kw> <din|-> <dout> <stride> [relu|linear]
///   <name> fusion <in1,in2,...> [<kh> <kw> <din> <dout> <stride>] [sum|max|concat]
///   latent <name>[,<name>...]
///   recon  <layer> <modality>
///
/// `#` starts a comment. Fields of fusion lines other than inputs and kind
/// may be written as `-`.
NetworkSpec parse_network_spec(const std::string& text, const std::string& name = "spec");
NetworkSpec load_network_spec(const std::string& path);

/// Replaces the kind of every fusion node.
void override_fusion(NetworkSpec& spec, FusionKind kind);

/// Per-sample [H, W, C] of every node, checked for consistency. Throws
/// SpecError naming the offending layer.
std::map<std::string, Shape> infer_shapes(const NetworkSpec& spec);

/// Kernel shape of a conv/deconv layer after channel inference.
Shape kernel_shape(const NetworkSpec& spec, const LayerSpec& layer, const std::map<std::string, Shape>& shapes);

/// Flattened width H * W * C of each latent, in declaration order.
std::vector<std::size_t> latent_widths(const NetworkSpec& spec);

struct NetworkParams {
    std::vector<std::string> order;  ///< layer names with kernels, declaration order
    std::map<std::string, Var> kernels;

    std::vector<Var> all() const;
    std::size_t parameter_count() const;
};

/// Allocates and initializes every kernel. Weights are uniform in
/// [-b, b] with b = sqrt(1 / fan_in), fan_in = kh * kw * din.
NetworkParams build_network(const NetworkSpec& spec, std::uint64_t seed);

/// Number of trainable kernel weights in the encoders and decoders.
std::size_t network_parameter_count(const NetworkSpec& spec);

/// Fusion functions over same-shape feature maps: position-wise sum, max
/// (gradient to the first maximal input), or channel concatenation in input
/// order.
Var fuse(FusionKind kind, const std::vector<Var>& maps);

struct AutoencodeResult {
    std::vector<Var> latents;          ///< N x D flattened, one per declared latent
    std::vector<Var> reconstructions;  ///< one per modality, input order
};

/// Runs encoders and decoders. `modalities` follow the spec's input order
/// with shape [N, H, W, C]. When `self_expressive` (N x N) is given each
/// flattened latent Z (N x D, row-major over H, W, C) is replaced by
/// coeffs^T Z before decoding, so column i of the coefficients expresses
/// sample i.
AutoencodeResult autoencode(const NetworkParams& params, const NetworkSpec& spec, const std::vector<Var>& modalities,
                            const Var* self_expressive = nullptr);

}  // namespace dmsc
