#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tslearn/errors.hpp"
#include "tslearn/model.hpp"

using namespace tsl;

namespace {

NetworkSpec lenet5() {
    return parse_spec(
        "input=3x32x32 layers=conv2d(6,5);relu;maxpool2d(2,2);conv2d(16,5);relu;maxpool2d(2,2);flatten;"
        "linear(120);relu;linear(84);relu features=84 classes=10");
}

// Random valid conv/pool/linear stack.
NetworkSpec random_spec(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> ch(1, 4), side(4, 10), width(1, 6);
    NetworkSpec s;
    s.input = {ch(rng), side(rng), side(rng)};
    std::size_t c = s.input[0], h = s.input[1], w = s.input[2];
    const int convs = static_cast<int>(rng() % 3);
    for (int i = 0; i < convs; ++i) {
        const std::size_t k = 1 + rng() % 3, pad = rng() % 2;
        if (h + 2 * pad < k || w + 2 * pad < k) break;
        const std::size_t oc = ch(rng);
        s.layers.push_back(LayerSpec::conv2d(oc, k, 1, pad));
        c = oc;
        h = h + 2 * pad - k + 1;
        w = w + 2 * pad - k + 1;
        if (rng() % 2) s.layers.push_back(LayerSpec::relu());
        if (h % 2 == 0 && w % 2 == 0 && rng() % 2) {
            s.layers.push_back(LayerSpec::maxpool2d(2, 2));
            h /= 2;
            w /= 2;
        }
    }
    s.layers.push_back(LayerSpec::flatten());
    std::size_t d = c * h * w;
    const int linears = static_cast<int>(rng() % 3);
    for (int i = 0; i < linears; ++i) {
        d = width(rng);
        s.layers.push_back(LayerSpec::linear(d));
        if (rng() % 2) s.layers.push_back(LayerSpec::relu());
    }
    s.feature_dim = d;
    s.num_classes = 2 + rng() % 5;
    return s;
}

}  // namespace

TEST_CASE("spec text round-trips") {
    const std::string text =
        "input=3x24x24 layers=conv2d(8,3,1,1);relu;maxpool2d(2,2);flatten;linear(32);relu features=32 classes=6";
    const NetworkSpec s = parse_spec(text);
    CHECK(format_spec(s) == text);
    CHECK(s.layers.size() == 6);
    CHECK(s.layers[0] == LayerSpec::conv2d(8, 3, 1, 1));
    CHECK(parse_spec("input=1x4x4 layers=conv2d(2,3);flatten features=8 classes=2").layers[0] ==
          LayerSpec::conv2d(2, 3, 1, 0));
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const NetworkSpec r = random_spec(rng);
        CHECK(parse_spec(format_spec(r)) == r);
    }
    CHECK_THROWS_AS(parse_spec("input=3x4x4 layers=flatten features=48"), ConfigError);
    CHECK_THROWS_AS(parse_spec("input=3x4x4 layers=pool(2) features=48 classes=2"), ConfigError);
    CHECK_THROWS_AS(parse_spec("input=3x4x4 layers=flatten features=48 classes=2 extra=1"), ConfigError);
    CHECK_THROWS_AS(parse_shape("3x0x4"), ConfigError);
}

TEST_CASE("parameter count of a LeNet5-style network") {
    // conv 6*3*25+6, conv 16*6*25+16, fc 400*120+120, fc 120*84+84, head 84*10+10
    CHECK(parameter_count(lenet5()) == 456 + 2416 + 48120 + 10164 + 850);
    CHECK(parameter_count(lenet5()) == 62006);
    std::size_t n = 0;
    for (const auto& p : build_model<float>(lenet5(), 1).parameters()) n += p.tensor.numel();
    CHECK(n == 62006);
}

TEST_CASE("shape propagation errors name the layer and surface at build") {
    NetworkSpec bad = parse_spec("input=3x5x5 layers=maxpool2d(2,2);flatten features=12 classes=2");
    CHECK_THROWS_AS(build_model<double>(bad, 1), ConfigError);
    try {
        propagate_shapes(bad);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
    CHECK_THROWS_AS(propagate_shapes(parse_spec("input=3x4x4 layers=flatten features=47 classes=2")), ConfigError);
    CHECK_THROWS_AS(propagate_shapes(parse_spec("input=3x4x4 layers=linear(3) features=3 classes=2")), ConfigError);
    CHECK_THROWS_AS(propagate_shapes(parse_spec("input=3x4x4 layers=conv2d(2,3) features=8 classes=2")), ConfigError);
}

TEST_CASE("build is a pure function of spec and seed") {
    const auto a = build_model<float>(lenet5(), 42), b = build_model<float>(lenet5(), 42);
    const auto c = build_model<float>(lenet5(), 43);
    REQUIRE(a.parameters().size() == b.parameters().size());
    bool differs = false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].name == b.parameters()[i].name);
        CHECK(a.parameters()[i].tensor == b.parameters()[i].tensor);
        differs = differs || !(a.parameters()[i].tensor == c.parameters()[i].tensor);
    }
    CHECK(differs);
    CHECK(a.parameters().front().name == "layers.0.weight");
    CHECK(a.parameters().back().name == "head.bias");
}

TEST_CASE("initialization is fan-in uniform with zero bias") {
    const auto m = build_model<double>(lenet5(), 7);
    for (const auto& p : m.parameters()) {
        const bool bias = p.name.ends_with("bias");
        const auto& s = p.tensor.shape();
        const std::size_t fan = s.size() == 4 ? s[1] * s[2] * s[3] : s.size() == 2 ? s[0] : 0;
        for (double v : p.tensor.values()) {
            if (bias) {
                CHECK(v == 0.0);
            } else {
                CHECK(std::abs(v) <= std::sqrt(6.0 / static_cast<double>(fan)));
            }
        }
    }
}

TEST_CASE("forward shapes match propagated shapes") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const NetworkSpec s = random_spec(rng);
        auto model = build_model<double>(s, rng());
        const std::size_t m = 1 + rng() % 3;
        Shape batch_shape{m};
        batch_shape.insert(batch_shape.end(), s.input.begin(), s.input.end());
        const auto x = oracle::random_tensor(batch_shape, rng);
        Graph<double> g;
        const auto out = model.forward(g, g.constant(x));
        CHECK(g.value(out.features).shape() == Shape{m, s.feature_dim});
        CHECK(g.value(out.logits).shape() == Shape{m, s.num_classes});
        const auto r = model.infer(x);
        CHECK(r.features == g.value(out.features));
        CHECK(r.logits == g.value(out.logits));
    }
}

TEST_CASE("zero weights give zero logits") {
    auto m = build_model<double>(lenet5(), 3);
    for (auto& p : m.mutable_parameters()) p.tensor.values().assign(p.tensor.numel(), 0.0);
    std::mt19937_64 rng(4);
    const auto r = m.infer(oracle::random_tensor({2, 3, 32, 32}, rng));
    for (double v : r.logits.values()) CHECK(v == 0.0);
    CHECK(r.features.shape() == Shape{2, 84});
}

TEST_CASE("two-layer model matches a hand-rolled forward") {
    const NetworkSpec s = parse_spec("input=1x1x2 layers=flatten;linear(3);relu features=3 classes=2");
    std::vector<NamedParameter<double>> params{
        {"layers.1.weight", Tensor<double>({2, 3}, {1, -1, 0.5, 2, 1, -3})},
        {"layers.1.bias", Tensor<double>({3}, {0.1, 0.2, 0.3})},
        {"head.weight", Tensor<double>({3, 2}, {1, 2, 3, 4, 5, 6})},
        {"head.bias", Tensor<double>({2}, {-1, 1})},
    };
    const ModelState<double> m(s, params);
    const auto r = m.infer(Tensor<double>({1, 1, 1, 2}, {0.5, 0.25}));
    // hidden = relu([0.5+0.5+0.1, -0.5+0.25+0.2, 0.25-0.75+0.3]) = [1.1, 0, 0]
    CHECK(r.features[0] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(r.features[1] == 0.0);
    CHECK(r.features[2] == 0.0);
    CHECK(r.logits[0] == doctest::Approx(1.1 * 1 - 1).epsilon(1e-12));
    CHECK(r.logits[1] == doctest::Approx(1.1 * 2 + 1).epsilon(1e-12));
    CHECK_THROWS_AS(m.infer(Tensor<double>({1, 1, 2, 1}, 0.0)), DimensionError);
    auto wrong = params;
    wrong[0].tensor = Tensor<double>({3, 2}, 0.0);
    CHECK_THROWS_AS(ModelState<double>(s, wrong), DimensionError);
}

TEST_CASE("validate_pair") {
    auto spec = [](std::size_t d, std::size_t c) {
        return parse_spec("input=1x1x" + std::to_string(d) + " layers=flatten features=" + std::to_string(d) +
                          " classes=" + std::to_string(c));
    };
    CHECK(validate_pair(spec(64, 10), spec(64, 10)).compatible);
    const auto r1 = validate_pair(spec(2048, 10), spec(64, 10));
    CHECK_FALSE(r1.compatible);
    REQUIRE(r1.violations.size() == 1);
    CHECK(r1.violations[0].find("feature dimension") != std::string::npos);
    const auto r2 = validate_pair(spec(8, 10), spec(8, 100));
    CHECK_FALSE(r2.compatible);
    REQUIRE(r2.violations.size() == 1);
    CHECK(r2.violations[0].find("class count") != std::string::npos);
    CHECK(validate_pair(spec(4, 3), spec(5, 2)).violations.size() == 2);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        const auto a = spec(1 + rng() % 4, 2 + rng() % 3), b = spec(1 + rng() % 4, 2 + rng() % 3);
        CHECK(validate_pair(a, b).compatible == validate_pair(b, a).compatible);
    }
}

TEST_CASE("freezing") {
    auto m = build_model<double>(lenet5(), 9);
    std::mt19937_64 rng(6);
    const auto x = oracle::random_tensor({2, 3, 32, 32}, rng);
    const auto before = m.infer(x);
    auto f = freeze(m);
    CHECK(f.frozen());
    CHECK(f.mode() == ModelMode::Frozen);
    const auto after = f.infer(x);
    CHECK(before.features == after.features);
    CHECK(before.logits == after.logits);
    CHECK_THROWS_AS(f.mutable_parameters(), UsageError);
    Graph<double> g;
    CHECK_THROWS_AS(f.forward(g, g.constant(x)), UsageError);
    for (const auto& p : f.parameters()) CHECK_FALSE(p.tensor.has_grad());
}
