#include "dmsc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dmsc {

std::string to_string(FusionKind kind) {
    switch (kind) {
        case FusionKind::Sum: return "sum";
        case FusionKind::Max: return "max";
        case FusionKind::Concat: return "concat";
    }
    return "?";
}

FusionKind parse_fusion_kind(const std::string& text) {
    if (text == "sum") return FusionKind::Sum;
    if (text == "max") return FusionKind::Max;
    if (text == "concat") return FusionKind::Concat;
    throw SpecError("unknown fusion kind '" + text + "'");
}

const LayerSpec* NetworkSpec::find_layer(const std::string& layer) const {
    for (const auto& l : layers)
        if (l.name == layer) return &l;
    return nullptr;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::size_t parse_size(const std::string& tok, int line_no, const char* field) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw SpecError("line " + std::to_string(line_no) + ": invalid " + field + " '" + tok + "'");
    }
}

}  // namespace

NetworkSpec parse_network_spec(const std::string& text, const std::string& name) {
    NetworkSpec spec;
    spec.name = name;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        const auto where = "line " + std::to_string(line_no) + ": ";

        if (tok[0] == "input") {
            if (tok.size() != 5) throw SpecError(where + "expected 'input <name> <H> <W> <C>'");
            spec.inputs.push_back({tok[1], parse_size(tok[2], line_no, "height"), parse_size(tok[3], line_no, "width"),
                                   parse_size(tok[4], line_no, "channels")});
            continue;
        }
        if (tok[0] == "latent") {
            if (tok.size() != 2) throw SpecError(where + "expected 'latent <name>[,<name>...]'");
            spec.latents = split(tok[1], ',');
            continue;
        }
        if (tok[0] == "recon") {
            if (tok.size() != 3) throw SpecError(where + "expected 'recon <layer> <modality>'");
            if (!spec.recon.emplace(tok[2], tok[1]).second)
                throw SpecError(where + "duplicate reconstruction for modality '" + tok[2] + "'");
            continue;
        }
        if (tok.size() < 3) throw SpecError(where + "expected '<name> <kind> <inputs> ...'");

        LayerSpec layer;
        layer.name = tok[0];
        layer.inputs = split(tok[2], ',');
        if (tok[1] == "fusion") {
            layer.kind = LayerKind::Fusion;
            if (tok.size() == 4)
                layer.fusion = parse_fusion_kind(tok[3]);
            else if (tok.size() == 9)
                layer.fusion = parse_fusion_kind(tok[8]);
            else if (tok.size() != 3 && tok.size() != 8)
                throw SpecError(where + "malformed fusion line for '" + layer.name + "'");
        } else if (tok[1] == "conv" || tok[1] == "deconv") {
            layer.kind = tok[1] == "conv" ? LayerKind::Conv : LayerKind::Deconv;
            if (tok.size() != 8 && tok.size() != 9)
                throw SpecError(where + "expected '<name> " + tok[1] + " <input> <kh> <kw> <din> <dout> <stride>'");
            layer.kh = parse_size(tok[3], line_no, "kh");
            layer.kw = parse_size(tok[4], line_no, "kw");
            if (tok[5] != "-") layer.din = parse_size(tok[5], line_no, "din");
            layer.dout = parse_size(tok[6], line_no, "dout");
            layer.stride = parse_size(tok[7], line_no, "stride");
            if (tok.size() == 9) {
                if (tok[8] == "relu")
                    layer.activation = Activation::Relu;
                else if (tok[8] == "linear")
                    layer.activation = Activation::Linear;
                else
                    throw SpecError(where + "unknown activation '" + tok[8] + "'");
            }
        } else {
            throw SpecError(where + "unknown layer kind '" + tok[1] + "'");
        }
        spec.layers.push_back(std::move(layer));
    }
    infer_shapes(spec);
    return spec;
}

NetworkSpec load_network_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SpecError("cannot open architecture spec '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    auto stem = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem.erase(dot);
    return parse_network_spec(ss.str(), stem);
}

void override_fusion(NetworkSpec& spec, FusionKind kind) {
    for (auto& l : spec.layers)
        if (l.kind == LayerKind::Fusion) l.fusion = kind;
}

Shape kernel_shape(const NetworkSpec&, const LayerSpec& layer, const std::map<std::string, Shape>& shapes) {
    const std::size_t upstream = shapes.at(layer.inputs.at(0))[2];
    const std::size_t din = layer.din.value_or(upstream);
    // conv: [kh, kw, din, dout]; deconv: [kh, kw, dout, din]
    if (layer.kind == LayerKind::Conv) return {layer.kh, layer.kw, din, layer.dout};
    return {layer.kh, layer.kw, layer.dout, din};
}

std::map<std::string, Shape> infer_shapes(const NetworkSpec& spec) {
    std::map<std::string, Shape> shapes;
    if (spec.inputs.empty()) throw SpecError(spec.name + ": no modality inputs declared");
    for (const auto& in : spec.inputs) {
        if (!shapes.emplace(in.name, Shape{in.height, in.width, in.channels}).second)
            throw SpecError(spec.name + ": duplicate input '" + in.name + "'");
    }
    std::map<std::string, std::set<std::string>> reaches;  // node -> modalities feeding it
    for (const auto& in : spec.inputs) reaches[in.name] = {in.name};

    for (const auto& l : spec.layers) {
        const auto where = spec.name + ": layer '" + l.name + "'";
        if (shapes.count(l.name)) throw SpecError(where + " is declared twice");
        for (const auto& src : l.inputs)
            if (!shapes.count(src)) throw SpecError(where + " reads undefined or later node '" + src + "'");

        if (l.kind == LayerKind::Fusion) {
            if (l.inputs.size() < 2) throw SpecError(where + ": fusion needs at least 2 inputs");
            const Shape& first = shapes.at(l.inputs[0]);
            for (const auto& src : l.inputs)
                if (shapes.at(src) != first)
                    throw SpecError(where + ": fusion inputs disagree, " + shape_to_string(first) + " vs " +
                                    shape_to_string(shapes.at(src)));
            Shape out = first;
            if (l.fusion == FusionKind::Concat) out[2] *= l.inputs.size();
            shapes[l.name] = out;
        } else {
            if (l.inputs.size() != 1) throw SpecError(where + ": conv/deconv takes exactly one input");
            const Shape& in = shapes.at(l.inputs[0]);
            if (l.din && *l.din != in[2])
                throw SpecError(where + ": declared din " + std::to_string(*l.din) + " but input has " +
                                std::to_string(in[2]) + " channels");
            if (l.stride != 1 && l.stride != 2) throw SpecError(where + ": stride must be 1 or 2");
            if (l.kind == LayerKind::Conv)
                shapes[l.name] = {conv_output_size(in[0], l.stride), conv_output_size(in[1], l.stride), l.dout};
            else
                shapes[l.name] = {in[0] * l.stride, in[1] * l.stride, l.dout};
        }
        auto& r = reaches[l.name];
        for (const auto& src : l.inputs) r.insert(reaches[src].begin(), reaches[src].end());
    }

    if (spec.latents.empty()) throw SpecError(spec.name + ": no latent declared");
    if (spec.latents.size() != 1 && spec.latents.size() != spec.inputs.size())
        throw SpecError(spec.name + ": expected 1 latent (spatial fusion) or one per modality (affinity fusion), got " +
                        std::to_string(spec.latents.size()));
    std::set<std::string> covered;
    for (const auto& lat : spec.latents) {
        if (!spec.find_layer(lat)) throw SpecError(spec.name + ": latent '" + lat + "' is not a layer");
        covered.insert(reaches[lat].begin(), reaches[lat].end());
    }
    for (const auto& in : spec.inputs) {
        if (!covered.count(in.name)) throw SpecError(spec.name + ": modality '" + in.name + "' never reaches a latent");
        // Encoder-only specs declare no reconstructions at all.
        if (spec.recon.empty()) continue;
        auto it = spec.recon.find(in.name);
        if (it == spec.recon.end()) throw SpecError(spec.name + ": modality '" + in.name + "' has no reconstruction");
        if (!spec.find_layer(it->second))
            throw SpecError(spec.name + ": reconstruction layer '" + it->second + "' is not defined");
        const Shape expect{in.height, in.width, in.channels};
        if (shapes.at(it->second) != expect)
            throw SpecError(spec.name + ": layer '" + it->second + "' reconstructs " + shape_to_string(shapes.at(it->second)) +
                            " but modality '" + in.name + "' is " + shape_to_string(expect));
    }
    for (const auto& [modality, layer] : spec.recon) {
        (void)layer;
        if (std::none_of(spec.inputs.begin(), spec.inputs.end(), [&](const InputSpec& i) { return i.name == modality; }))
            throw SpecError(spec.name + ": reconstruction for unknown modality '" + modality + "'");
    }
    return shapes;
}

std::vector<std::size_t> latent_widths(const NetworkSpec& spec) {
    auto shapes = infer_shapes(spec);
    std::vector<std::size_t> out;
    for (const auto& lat : spec.latents) out.push_back(shape_numel(shapes.at(lat)));
    return out;
}

std::vector<Var> NetworkParams::all() const {
    std::vector<Var> out;
    for (const auto& n : order) out.push_back(kernels.at(n));
    return out;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, k] : kernels) n += k.value().size();
    return n;
}

NetworkParams build_network(const NetworkSpec& spec, std::uint64_t seed) {
    const auto shapes = infer_shapes(spec);
    NetworkParams params;
    std::mt19937_64 rng(seed);
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::Fusion) continue;
        Shape ks = kernel_shape(spec, l, shapes);
        const std::size_t din = l.kind == LayerKind::Conv ? ks[2] : ks[3];
        const double bound = std::sqrt(1.0 / static_cast<double>(l.kh * l.kw * din));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor k(ks);
        for (auto& v : k.values()) v = dist(rng);
        params.order.push_back(l.name);
        params.kernels.emplace(l.name, Var::parameter(std::move(k), l.name));
    }
    return params;
}

std::size_t network_parameter_count(const NetworkSpec& spec) {
    const auto shapes = infer_shapes(spec);
    std::size_t n = 0;
    for (const auto& l : spec.layers)
        if (l.kind != LayerKind::Fusion) n += shape_numel(kernel_shape(spec, l, shapes));
    return n;
}

Var fuse(FusionKind kind, const std::vector<Var>& maps) {
    if (maps.empty()) throw ShapeError("fuse: no inputs");
    const Shape& shape = maps[0].shape();
    for (const auto& m : maps)
        if (m.shape() != shape)
            throw ShapeError("fuse: shape mismatch " + shape_to_string(shape) + " vs " + shape_to_string(m.shape()));
    const std::size_t numel = shape_numel(shape);

    if (kind == FusionKind::Sum) {
        Tensor out(shape, 0.0);
        for (const auto& m : maps)
            for (std::size_t i = 0; i < numel; ++i) out[i] += m.value()[i];
        return make_op(std::move(out), maps, [maps](Node& self) {
            for (const auto& m : maps) {
                if (!m.requires_grad()) continue;
                Tensor& g = m.node()->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*self.grad)[i];
            }
        });
    }

    if (kind == FusionKind::Max) {
        Tensor out = maps[0].value();
        std::vector<std::size_t> argmax(numel, 0);
        for (std::size_t m = 1; m < maps.size(); ++m)
            for (std::size_t i = 0; i < numel; ++i)
                if (maps[m].value()[i] > out[i]) {  // strict: ties stay with the lowest index
                    out[i] = maps[m].value()[i];
                    argmax[i] = m;
                }
        return make_op(std::move(out), maps, [maps, argmax = std::move(argmax)](Node& self) {
            for (std::size_t i = 0; i < argmax.size(); ++i) {
                const Var& m = maps[argmax[i]];
                if (m.requires_grad()) m.node()->ensure_grad()[i] += (*self.grad)[i];
            }
        });
    }

    // Concat along channels: out[..., m*C + c] = maps[m][..., c]
    const std::size_t channels = shape.back();
    const std::size_t positions = numel / channels;
    const std::size_t total = channels * maps.size();
    Shape out_shape = shape;
    out_shape.back() = total;
    Tensor out(out_shape);
    for (std::size_t m = 0; m < maps.size(); ++m)
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t c = 0; c < channels; ++c) out[p * total + m * channels + c] = maps[m].value()[p * channels + c];
    return make_op(std::move(out), maps, [maps, channels, positions, total](Node& self) {
        for (std::size_t m = 0; m < maps.size(); ++m) {
            if (!maps[m].requires_grad()) continue;
            Tensor& g = maps[m].node()->ensure_grad();
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t c = 0; c < channels; ++c)
                    g[p * channels + c] += (*self.grad)[p * total + m * channels + c];
        }
    });
}

AutoencodeResult autoencode(const NetworkParams& params, const NetworkSpec& spec, const std::vector<Var>& modalities,
                            const Var* self_expressive) {
    if (modalities.size() != spec.inputs.size())
        throw ShapeError("autoencode: spec '" + spec.name + "' expects " + std::to_string(spec.inputs.size()) +
                         " modalities, got " + std::to_string(modalities.size()));
    const std::size_t n = modalities[0].shape().at(0);
    std::map<std::string, Var> nodes;
    for (std::size_t m = 0; m < modalities.size(); ++m) {
        const auto& in = spec.inputs[m];
        const Shape expect{n, in.height, in.width, in.channels};
        if (modalities[m].shape() != expect)
            throw ShapeError("autoencode: modality '" + in.name + "' has shape " +
                             shape_to_string(modalities[m].shape()) + ", expected " + shape_to_string(expect));
        nodes.emplace(in.name, modalities[m]);
    }
    if (self_expressive) {
        const Shape& cs = self_expressive->shape();
        if (cs.size() != 2 || cs[0] != n || cs[1] != n)
            throw ShapeError("autoencode: self-expressive layer is " + shape_to_string(cs) + " but batch has N = " +
                             std::to_string(n));
    }

    std::set<std::string> recon_layers;
    for (const auto& [mod, layer] : spec.recon) recon_layers.insert(layer);

    AutoencodeResult result;
    std::map<std::string, Var> flat_latents;
    std::map<std::string, Var> expressed;  // latent name -> decoder input
    Var coeffs_t;
    if (self_expressive) coeffs_t = transpose(*self_expressive);

    auto resolve = [&](const std::string& src, bool decoder) -> Var {
        if (decoder) {
            auto it = expressed.find(src);
            if (it != expressed.end()) return it->second;
        }
        return nodes.at(src);
    };

    for (const auto& l : spec.layers) {
        Var out;
        if (l.kind == LayerKind::Fusion) {
            std::vector<Var> ins;
            for (const auto& src : l.inputs) ins.push_back(resolve(src, false));
            out = fuse(l.fusion, ins);
        } else {
            const bool decoder = l.kind == LayerKind::Deconv;
            Var in = resolve(l.inputs[0], decoder);
            const Var& k = params.kernels.at(l.name);
            out = decoder ? deconv2d(in, k, l.stride) : conv2d(in, k, l.stride);
            bool apply_relu = l.activation == Activation::Relu ||
                              (l.activation == Activation::Default && !recon_layers.count(l.name));
            if (apply_relu) out = relu(out);
        }
        nodes.emplace(l.name, out);

        if (std::find(spec.latents.begin(), spec.latents.end(), l.name) != spec.latents.end()) {
            const Shape s = out.shape();
            Var flat = reshape(out, Shape{n, shape_numel(s) / n});
            flat_latents.emplace(l.name, flat);
            if (self_expressive) expressed.emplace(l.name, reshape(matmul(coeffs_t, flat), s));
        }
    }
    for (const auto& lat : spec.latents) result.latents.push_back(flat_latents.at(lat));
    for (const auto& in : spec.inputs)
        if (auto it = spec.recon.find(in.name); it != spec.recon.end()) result.reconstructions.push_back(nodes.at(it->second));
    return result;
}

}  // namespace dmsc
