#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "dmsc/gradcheck.hpp"
#include "dmsc/network.hpp"
#include "test_util.hpp"

using namespace dmsc;
using dmsc::testing::random_tensor;

namespace {

NetworkSpec shipped(const std::string& name) { return load_network_spec(std::string(DMSC_SPEC_DIR) + "/" + name + ".spec"); }

std::map<std::string, Shape> kernels_of(const NetworkSpec& spec) {
    const auto shapes = infer_shapes(spec);
    std::map<std::string, Shape> out;
    for (const auto& layer : spec.layers)
        if (layer.kind != LayerKind::Fusion) out[layer.name] = kernel_shape(spec, layer, shapes);
    return out;
}

const char* kTiny = R"(
input a 4 4 1
input b 4 4 1
A/conv1 conv a 3 3 1 2 2
B/conv1 conv b 3 3 1 2 2
fusion1 fusion A/conv1,B/conv1 sum
latent fusion1
D1/deconv1 deconv fusion1 3 3 - 1 2
D2/deconv1 deconv fusion1 3 3 - 1 2
recon D1/deconv1 a
recon D2/deconv1 b
)";

}  // namespace

TEST(Fuse, SumOfCopies) {
    std::mt19937_64 rng(1);
    Var x = Var::constant(random_tensor({1, 2, 2, 3}, rng));
    Var s = fuse(FusionKind::Sum, {x, x, x});
    for (std::size_t i = 0; i < s.value().size(); ++i) EXPECT_DOUBLE_EQ(s.value()[i], 3.0 * x.value()[i]);
}

TEST(Fuse, MaxIsIdempotent) {
    std::mt19937_64 rng(2);
    Var x = Var::constant(random_tensor({1, 2, 2, 3}, rng));
    Var m = fuse(FusionKind::Max, {x, x});
    for (std::size_t i = 0; i < m.value().size(); ++i) EXPECT_EQ(m.value()[i], x.value()[i]);
}

TEST(Fuse, ConcatChannelOrder) {
    Tensor a(Shape{1, 2, 2, 3}), b(Shape{1, 2, 2, 3});
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>(i);
        b[i] = 100.0 + static_cast<double>(i);
    }
    Var c = fuse(FusionKind::Concat, {Var::constant(a), Var::constant(b)});
    ASSERT_EQ(c.shape(), (Shape{1, 2, 2, 6}));
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t w = 0; w < 2; ++w)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                EXPECT_EQ(c.value().at(0, h, w, ch), a.at(0, h, w, ch));
                EXPECT_EQ(c.value().at(0, h, w, ch + 3), b.at(0, h, w, ch));
            }
}

TEST(Fuse, SumAndMaxArePermutationInvariant) {
    std::mt19937_64 rng(3);
    Var x = Var::constant(random_tensor({2, 2, 2, 2}, rng)), y = Var::constant(random_tensor({2, 2, 2, 2}, rng)),
        z = Var::constant(random_tensor({2, 2, 2, 2}, rng));
    for (FusionKind k : {FusionKind::Sum, FusionKind::Max}) {
        const Tensor a = fuse(k, {x, y, z}).value(), b = fuse(k, {z, x, y}).value();
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
    }
}

TEST(Fuse, MismatchedShapesRejected) {
    Var a = Var::constant(Tensor(Shape{1, 2, 2, 3})), b = Var::constant(Tensor(Shape{1, 2, 2, 4}));
    EXPECT_THROW(fuse(FusionKind::Sum, {a, b}), ShapeError);
}

TEST(Fuse, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(4);
    Var a = Var::parameter(random_tensor({1, 3, 3, 2}, rng)), b = Var::parameter(random_tensor({1, 3, 3, 2}, rng));
    for (FusionKind k : {FusionKind::Sum, FusionKind::Max, FusionKind::Concat})
        EXPECT_LT(grad_check([&] { return frobenius_sq(fuse(k, {a, b})); }, {a, b}), 1e-4) << to_string(k);
}

TEST(Fuse, MaxTieRoutesGradientToFirstInput) {
    Var a = Var::parameter(Tensor(Shape{1, 1, 1, 1}, 2.0)), b = Var::parameter(Tensor(Shape{1, 1, 1, 1}, 2.0));
    backward(sum(fuse(FusionKind::Max, {a, b})));
    EXPECT_EQ((*a.grad())[0], 1.0);
    EXPECT_TRUE(!b.grad() || (*b.grad())[0] == 0.0);
}

TEST(SpecParser, ParsesTinySpec) {
    const NetworkSpec spec = parse_network_spec(kTiny, "tiny");
    EXPECT_EQ(spec.inputs.size(), 2u);
    EXPECT_EQ(spec.layers.size(), 5u);
    EXPECT_FALSE(spec.is_affinity());
    EXPECT_EQ(spec.find_layer("fusion1")->fusion, FusionKind::Sum);
    EXPECT_EQ(spec.recon.at("b"), "D2/deconv1");
}

TEST(SpecParser, RejectsSingleInputFusion) {
    EXPECT_THROW(infer_shapes(parse_network_spec("input a 4 4 1\nf fusion a sum\nlatent f\n")), SpecError);
}

TEST(SpecParser, RejectsUndeclaredInput) {
    EXPECT_THROW(parse_network_spec("input a 4 4 1\nc conv missing 1 1 1 1 1\n"), SpecError);
}

TEST(SpecParser, ChannelMismatchNamesLayer) {
    const std::string text = "input a 4 4 1\nenc conv a 3 3 2 4 1\nlatent enc\ndec deconv enc 3 3 4 1 1\nrecon dec a\n";
    try {
        infer_shapes(parse_network_spec(text));
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_NE(std::string(e.what()).find("enc"), std::string::npos) << e.what();
    }
}

TEST(SpecParser, ReconstructionShapeMustMatchInput) {
    const std::string text = "input a 4 4 1\nenc conv a 3 3 1 4 2\nlatent enc\ndec deconv enc 3 3 4 1 1\nrecon dec a\n";
    EXPECT_THROW(infer_shapes(parse_network_spec(text)), SpecError);
}

TEST(SpecParser, FusionOverride) {
    NetworkSpec spec = parse_network_spec(kTiny);
    override_fusion(spec, FusionKind::Concat);
    EXPECT_EQ(infer_shapes(spec).at("fusion1"), (Shape{2, 2, 4}));
}

TEST(BuildNetwork, OneConvOneKernel) {
    const NetworkSpec spec = parse_network_spec("input a 4 4 1\nenc conv a 3 3 1 2 1\nlatent enc\n");
    const NetworkParams p = build_network(spec, 0);
    EXPECT_EQ(p.kernels.size(), 1u);
    EXPECT_EQ(p.kernels.at("enc").shape(), (Shape{3, 3, 1, 2}));
}

TEST(BuildNetwork, DeterministicAndBoundedInit) {
    const NetworkSpec spec = parse_network_spec(kTiny);
    const NetworkParams a = build_network(spec, 7), b = build_network(spec, 7), c = build_network(spec, 8);
    const auto shapes = infer_shapes(spec);
    bool differs = false;
    for (const auto& name : a.order) {
        const Tensor& ka = a.kernels.at(name).value();
        const Shape ks = ka.shape();
        const double bound = std::sqrt(1.0 / static_cast<double>(ks[0] * ks[1] * ks[2]));
        for (std::size_t i = 0; i < ka.size(); ++i) {
            EXPECT_EQ(ka[i], b.kernels.at(name).value()[i]);
            EXPECT_LE(std::abs(ka[i]), bound);
            differs = differs || ka[i] != c.kernels.at(name).value()[i];
        }
    }
    EXPECT_TRUE(differs);
}

// Golden kernel shapes from the architecture tables.

TEST(ShippedSpecs, YaleAffinityBranches) {
    const NetworkSpec spec = shipped("yaleb_affinity");
    ASSERT_TRUE(spec.is_affinity());
    ASSERT_EQ(spec.latents.size(), 5u);
    const auto k = kernels_of(spec);
    for (int b = 1; b <= 5; ++b) {
        const std::string p = "B" + std::to_string(b) + "/";
        EXPECT_EQ(k.at(p + "conv1"), (Shape{5, 5, 1, 10}));
        EXPECT_EQ(k.at(p + "conv2"), (Shape{3, 3, 10, 20}));
        EXPECT_EQ(k.at(p + "conv3"), (Shape{3, 3, 20, 30}));
        EXPECT_EQ(k.at(p + "conv4"), (Shape{3, 3, 30, 30}));
    }
    const auto shapes = infer_shapes(spec);
    for (const auto& latent : spec.latents) EXPECT_EQ(shapes.at(latent), (Shape{8, 8, 30}));
}

TEST(ShippedSpecs, DigitsLateBranches) {
    const NetworkSpec spec = shipped("digits_late");
    const auto k = kernels_of(spec);
    for (const char* p : {"B1/", "B2/"}) {
        EXPECT_EQ(k.at(std::string(p) + "conv1"), (Shape{7, 7, 1, 7}));
        EXPECT_EQ(k.at(std::string(p) + "conv2"), (Shape{5, 5, 7, 10}));
        EXPECT_EQ(k.at(std::string(p) + "conv3"), (Shape{3, 3, 10, 15}));
        EXPECT_EQ(k.at(std::string(p) + "conv4"), (Shape{1, 1, 15, 15}));
    }
    EXPECT_EQ(infer_shapes(spec).at(spec.latents[0]), (Shape{8, 8, 30}));
}

TEST(ShippedSpecs, DigitsAffinityAsymmetricBranches) {
    const auto k = kernels_of(shipped("digits_affinity"));
    EXPECT_EQ(k.at("B1/conv4"), (Shape{3, 3, 30, 30}));
    EXPECT_EQ(k.at("B2/conv4"), (Shape{3, 3, 15, 15}));
}

TEST(ShippedSpecs, ArlIntermediateMergeOrder) {
    const NetworkSpec spec = shipped("arl_interm");
    EXPECT_EQ(spec.find_layer("B345/fusion")->inputs, (std::vector<std::string>{"B3/conv1", "B4/conv1", "B5/conv1"}));
    EXPECT_EQ(spec.find_layer("B3/conv1")->inputs[0], "s0");
    EXPECT_EQ(spec.find_layer("B2/conv1")->inputs[0], "dp");
    EXPECT_EQ(spec.find_layer("B2345/fusion")->inputs, (std::vector<std::string>{"B345/conv2", "B2/conv2"}));
    EXPECT_EQ(spec.find_layer("Ball/fusion")->inputs, (std::vector<std::string>{"B1/conv3", "B2345/conv3"}));
    EXPECT_EQ(spec.find_layer("B1/conv1")->inputs[0], "visible");
}

TEST(ShippedSpecs, YaleIntermediateMergeOrder) {
    const NetworkSpec spec = shipped("yaleb_interm");
    EXPECT_EQ(spec.find_layer("B23/fusion")->inputs, (std::vector<std::string>{"B2/conv1", "B3/conv1"}));
    EXPECT_EQ(spec.find_layer("B45/fusion")->inputs, (std::vector<std::string>{"B4/conv1", "B5/conv1"}));
    EXPECT_EQ(spec.find_layer("B2345/fusion")->inputs, (std::vector<std::string>{"B23/conv2", "B45/conv2"}));
    EXPECT_EQ(spec.find_layer("Ball/fusion")->inputs, (std::vector<std::string>{"B1/conv3", "B2345/conv3"}));
}

TEST(ShippedSpecs, AllReconstructTheirInputs) {
    for (const char* name : {"digits_early", "digits_late", "digits_affinity", "arl_early", "arl_interm", "arl_late",
                             "arl_affinity", "yaleb_early", "yaleb_interm", "yaleb_late", "yaleb_affinity",
                             "synth_affinity", "synth_late"}) {
        const NetworkSpec spec = shipped(name);
        const auto shapes = infer_shapes(spec);
        ASSERT_EQ(spec.recon.size(), spec.inputs.size()) << name;
        for (const auto& in : spec.inputs)
            EXPECT_EQ(shapes.at(spec.recon.at(in.name)), (Shape{in.height, in.width, in.channels})) << name;
        EXPECT_EQ(spec.latents.size() == 1 || spec.latents.size() == spec.inputs.size(), true) << name;
    }
}

TEST(ShippedSpecs, AffinityBranchesShareNoParameters) {
    const NetworkSpec spec = shipped("arl_affinity");
    const NetworkParams p = build_network(spec, 0);
    std::set<const Node*> nodes;
    for (const auto& [name, var] : p.kernels) nodes.insert(var.node().get());
    EXPECT_EQ(nodes.size(), p.kernels.size());
    // Every kernel belongs to exactly one branch prefix.
    std::set<std::string> prefixes;
    for (const auto& name : p.order) prefixes.insert(name.substr(0, name.find('/')));
    EXPECT_EQ(prefixes.size(), 10u);  // B1..B5 and D1..D5
}

TEST(Autoencode, IdentityNetworkCopiesInput) {
    const NetworkSpec spec =
        parse_network_spec("input a 3 3 1\nenc conv a 1 1 1 1 1\nlatent enc\ndec deconv enc 1 1 1 1 1\nrecon dec a\n");
    NetworkParams p = build_network(spec, 0);
    for (auto& [name, var] : p.kernels) var.mutable_value().fill(1.0);
    std::mt19937_64 rng(5);
    Var x = Var::constant(random_tensor({4, 3, 3, 1}, rng, 0.0, 255.0));
    const auto out = autoencode(p, spec, {x});
    for (std::size_t i = 0; i < x.value().size(); ++i) EXPECT_EQ(out.reconstructions[0].value()[i], x.value()[i]);
}

TEST(Autoencode, ZeroCoefficientsGiveZeroDecoderInput) {
    const NetworkSpec spec = parse_network_spec(kTiny);
    const NetworkParams p = build_network(spec, 1);
    std::mt19937_64 rng(6);
    std::vector<Var> x{Var::constant(random_tensor({5, 4, 4, 1}, rng)), Var::constant(random_tensor({5, 4, 4, 1}, rng))};
    Var coeffs = Var::parameter(Tensor(Shape{5, 5}, 0.0));
    const auto out = autoencode(p, spec, x, &coeffs);
    // Bias-free decoders map the zero latent to zero.
    for (const auto& r : out.reconstructions)
        for (double v : r.value().values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(out.latents[0].shape(), (Shape{5, 2 * 2 * 2}));
}

TEST(Autoencode, SampleCountMismatchRejected) {
    const NetworkSpec spec = parse_network_spec(kTiny);
    const NetworkParams p = build_network(spec, 1);
    std::vector<Var> x{Var::constant(Tensor(Shape{5, 4, 4, 1})), Var::constant(Tensor(Shape{5, 4, 4, 1}))};
    Var coeffs = Var::parameter(Tensor(Shape{4, 4}, 0.0));
    EXPECT_THROW(autoencode(p, spec, x, &coeffs), ShapeError);
}

TEST(Autoencode, SelfExpressedLatentFeedsDecoder) {
    // With coeffs = swap of samples 0 and 1, the decoder of sample 0 sees the latent of sample 1.
    const NetworkSpec spec =
        parse_network_spec("input a 2 2 1\nenc conv a 1 1 1 1 1\nlatent enc\ndec deconv enc 1 1 1 1 1\nrecon dec a\n");
    NetworkParams p = build_network(spec, 0);
    for (auto& [name, var] : p.kernels) var.mutable_value().fill(1.0);
    std::mt19937_64 rng(7);
    Var x = Var::constant(random_tensor({2, 2, 2, 1}, rng, 0.5, 1.0));
    Var swap = Var::parameter(Tensor(Shape{2, 2}, std::vector<double>{0, 1, 1, 0}));
    const auto out = autoencode(p, spec, {x}, &swap);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_DOUBLE_EQ(out.reconstructions[0].value()[j], x.value()[4 + j]);
        EXPECT_DOUBLE_EQ(out.reconstructions[0].value()[4 + j], x.value()[j]);
    }
}

TEST(Autoencode, GradientsThroughWholeNetwork) {
    const NetworkSpec spec = parse_network_spec(kTiny);
    NetworkParams p = build_network(spec, 2);
    std::mt19937_64 rng(8);
    std::vector<Var> x{Var::constant(random_tensor({3, 4, 4, 1}, rng)), Var::constant(random_tensor({3, 4, 4, 1}, rng))};
    Var coeffs = Var::parameter(random_tensor({3, 3}, rng, -0.5, 0.5));
    auto params = p.all();
    params.push_back(coeffs);
    auto loss = [&] {
        const auto out = autoencode(p, spec, x, &coeffs);
        return add(frobenius_sq(sub(x[0], out.reconstructions[0])), frobenius_sq(sub(x[1], out.reconstructions[1])));
    };
    GradCheckOptions opts;
    opts.step = 1e-6;
    EXPECT_LT(grad_check(loss, params, opts), 1e-4);
}
