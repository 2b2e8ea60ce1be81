#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

#include "handjog/compress.hpp"
#include "handjog/error.hpp"
#include "support.hpp"

using namespace handjog;
using handjog::testing::trained;

namespace {

MlpParams single_layer(std::vector<double> weights, int fan_in, int fan_out) {
    auto p = MlpParams::zeros(LayerSpec{{fan_in, fan_out}});
    p.layers[0].weights = std::move(weights);
    return p;
}

}  // namespace

TEST_CASE("prune: two smallest magnitudes go to zero") {
    const auto p = single_layer({1.0, -3.0, 0.5, 2.0}, 2, 2);
    // floor(0.5 * 4) = 2 entries: 0.5 and then 1.
    const auto q = prune_magnitude(p, PruneConfig{0.5});
    CHECK(q.layers[0].weights == std::vector<double>{0.0, -3.0, 0.0, 2.0});
    CHECK(prune_magnitude(p, PruneConfig{0.0}) == p);
    CHECK(weight_sparsity(q) == doctest::Approx(0.5));
    CHECK(prune_magnitude(p, PruneConfig{0.25}).layers[0].weights == std::vector<double>{1.0, -3.0, 0.0, 2.0});
}

TEST_CASE("prune: ties break by index, biases kept") {
    auto p = single_layer({1.0, 1.0, 1.0, 1.0}, 2, 2);
    p.layers[0].bias = {0.001, -0.002};
    const auto q = prune_magnitude(p, PruneConfig{0.5});
    CHECK(q.layers[0].weights == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    CHECK(q.layers[0].bias == p.layers[0].bias);
}

TEST_CASE("prune is idempotent and counts per matrix") {
    const auto p = init_params(default_layer_spec(), InitScheme::he_uniform, 3);
    const auto once = prune_magnitude(p, PruneConfig{0.3});
    CHECK(prune_magnitude(once, PruneConfig{0.3}) == once);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& w = once.layers[l].weights;
        const auto zeros = static_cast<std::size_t>(std::count(w.begin(), w.end(), 0.0));
        CHECK(zeros == static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(w.size()))));
    }
    CHECK_THROWS_AS(prune_magnitude(p, PruneConfig{1.0}), ValidationError);
}

TEST_CASE("symmetric quantization: grid values are exact") {
    std::vector<double> grid;
    for (int i = -127; i <= 127; ++i) grid.push_back(i * 0.01);
    const auto q = quantize_symmetric(grid);
    CHECK(q.zero_point == 0);
    CHECK(q.scale == doctest::Approx(0.01).epsilon(1e-6));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(q.data[i] == static_cast<int>(i) - 127);
        CHECK(std::abs(q.dequantize(i) - grid[i]) < 1e-6);
    }
}

TEST_CASE("symmetric quantization: error at most half a step") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(200);
        const double span = rng.uniform(0.01, 10.0);
        for (auto& x : v) x = rng.uniform(-span, span);
        const auto q = quantize_symmetric(v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(q.dequantize(i) - v[i]) <= q.scale / 2.0 * (1.0 + 1e-9));
        }
    }
    const std::vector<double> zeros(5, 0.0);
    CHECK(quantize_symmetric(zeros).scale == 1.0f);
}

TEST_CASE("activation quant covers zero") {
    const auto a = activation_quant_from_range(0.5, 2.0);
    CHECK(quantize_value(0.0, a) == a.zero_point);
    CHECK(a.zero_point >= -128);
    CHECK(a.zero_point <= 127);
    CHECK(quantize_value(1e9, a) == 127);
    CHECK(quantize_value(-1e9, a) == -128);
}

TEST_CASE("quantized zero model is uniform") {
    const auto zeros = MlpParams::zeros(default_layer_spec());
    SyntheticOptions o;
    o.per_class = 2;
    const auto qm = quantize(zeros, generate_synthetic_dataset(o));
    const auto out = quantized_forward(qm, std::vector<double>(42, 0.2));
    for (double p : out.probabilities) CHECK(p == doctest::Approx(0.125));
    CHECK(out.event.label == 0);
    CHECK_THROWS_AS(quantized_forward(qm, std::vector<double>(40, 0.0)), ValidationError);
    CHECK_THROWS_AS(quantize(zeros, Dataset{}), ValidationError);
}

TEST_CASE("representable single layer agrees everywhere") {
    // Weights on the int8 grid and margins far above the activation step.
    const auto p = single_layer({1.0, 0.0, 0.0, 1.0}, 2, 2);
    Rng rng(5);
    Dataset d;
    d.class_count = 2;
    while (d.size() < 200) {
        const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
        if (std::abs(a - b) < 0.1) continue;
        d.samples.push_back({a > b ? 0 : 1, {a, b}});
    }
    const auto qm = quantize(p, d);
    CHECK(agreement_rate(p, qm, d) == 1.0);
}

TEST_CASE("trained model: logits error and agreement") {
    const auto& t = trained();
    const auto qm = quantize(t.params, t.split.train);
    double mae = 0.0;
    std::size_t n = 0;
    for (const auto& s : t.split.val.samples) {
        const auto f = forward(t.params, s.features);
        const auto q = quantized_forward(qm, s.features);
        for (std::size_t j = 0; j < f.logits.size(); ++j, ++n) mae += std::abs(f.logits[j] - q.logits[j]);
    }
    mae /= static_cast<double>(n);
    CHECK(mae < 0.25);
    const double rate = agreement_rate(t.params, qm, t.split.val);
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);
    CHECK(rate >= 0.98);
}

TEST_CASE("quantized forward is deterministic across threads") {
    const auto& t = trained();
    const auto qm = quantize(t.params, t.split.train);
    const auto& x = t.split.val.samples.front().features;
    const auto ref = quantized_forward(qm, x).logits;
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int k = 0; k < 4; ++k) {
        threads.emplace_back([&] {
            for (int i = 0; i < 500; ++i) {
                const auto got = quantized_forward(qm, x).logits;
                if (std::memcmp(got.data(), ref.data(), ref.size() * sizeof(double)) != 0) ++mismatches;
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(mismatches.load() == 0);
}

TEST_CASE("TGQ1 round trip, size and errors") {
    const auto& t = trained();
    const auto qm = quantize(prune_magnitude(t.params, PruneConfig{0.3}), t.split.train);
    const auto bytes = serialize(qm);
    CHECK(bytes.size() <= kQuantizedSizeBudget);
    const auto back = deserialize(bytes);
    CHECK(back == qm);
    CHECK(serialize(back) == bytes);

    // Dense storage: the size does not depend on sparsity.
    CHECK(serialize(quantize(t.params, t.split.train)).size() == bytes.size());

    auto bad = bytes;
    std::memcpy(bad.data(), "TGN1", 4);
    CHECK_THROWS_AS(deserialize(bad), ValidationError);
    for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
        CHECK_THROWS_AS(deserialize(std::span(bytes).first(cut)), ValidationError);
    }
}
