#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kga/errors.hpp"
#include "kga/grad_check.hpp"
#include "kga/param_store.hpp"
#include "kga/rng.hpp"
#include "kga/tensor.hpp"
#include "kga/weights_io.hpp"

using namespace kga;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("softmax symmetry and simplex contract") {
    const auto p = softmax(std::vector<double>{0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(41);
    for (int it = 0; it < 100; ++it) {
        const auto v = random_vector(rng, 1 + rng.uniform_index(12), -30.0, 30.0);
        const auto q = softmax(v);
        double sum = 0.0;
        for (double x : q) {
            CHECK(x > 0.0);
            CHECK(x <= 1.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax shift invariance") {
    Rng rng(42);
    for (int it = 0; it < 20; ++it) {
        const auto v = random_vector(rng, 5);
        auto shifted = v;
        const double c = rng.uniform(-50.0, 50.0);
        for (double& x : shifted) x += c;
        const auto a = softmax(v);
        const auto b = softmax(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("softmax matches extended-precision reference on [1,2,3]") {
    // independent oracle: evaluate the definition in long double
    const std::vector<double> logits{1.0, 2.0, 3.0};
    long double sum = 0.0L;
    std::vector<long double> reference(3);
    for (std::size_t i = 0; i < 3; ++i) {
        reference[i] = expl(static_cast<long double>(logits[i]));
        sum += reference[i];
    }
    const auto p = softmax(logits);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(p[i] - static_cast<double>(reference[i] / sum)) <= 1e-12);
    }
}

TEST_CASE("softmax rejects empty and non-finite input") {
    CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidArgument);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), InvalidArgument);
}

TEST_CASE("clip_global_norm below threshold is bitwise identity") {
    ParamStore grads;
    grads.add("g", Tensor::vector({0.3, 0.4}));  // norm 0.5
    const auto before = grads.get("g").values;
    clip_global_norm(grads, 1.0);
    CHECK(grads.get("g").values == before);
}

TEST_CASE("clip_global_norm scales [3,4] to [0.6,0.8] exactly") {
    ParamStore grads;
    grads.add("g", Tensor::vector({3.0, 4.0}));  // norm 5
    clip_global_norm(grads, 1.0);
    CHECK(grads.get("g").values[0] == 0.6);
    CHECK(grads.get("g").values[1] == 0.8);
}

TEST_CASE("clip_global_norm zero gradients stay zero") {
    ParamStore grads;
    grads.add("g", Tensor::zeros({4}));
    clip_global_norm(grads, 1.0);
    for (double v : grads.get("g").values) CHECK(v == 0.0);
}

TEST_CASE("clip_global_norm is idempotent") {
    Rng rng(7);
    for (int it = 0; it < 50; ++it) {
        ParamStore grads;
        grads.add("a", Tensor::vector(random_vector(rng, 5)));
        grads.add("b", Tensor::vector(random_vector(rng, 3)));
        clip_global_norm(grads, 0.5);
        const auto a = grads.get("a").values;
        const auto b = grads.get("b").values;
        clip_global_norm(grads, 0.5);
        CHECK(grads.get("a").values == a);
        CHECK(grads.get("b").values == b);
    }
}

TEST_CASE("clip_global_norm rejects non-positive max_norm") {
    ParamStore grads;
    grads.add("g", Tensor::vector({1.0}));
    CHECK_THROWS_AS(clip_global_norm(grads, 0.0), InvalidArgument);
}

TEST_CASE("adam zero gradients leave parameters bitwise unchanged") {
    ParamStore params;
    params.add("w", Tensor::vector({1.25, -0.5, 3.0}));
    const auto before = params.get("w").values;
    ParamStore grads;
    grads.add("w", Tensor::zeros({3}));
    AdamState state;
    adam_step(params, grads, state);
    CHECK(params.get("w").values == before);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam first bias-corrected step on a scalar") {
    ParamStore params;
    params.add("theta", Tensor::vector({0.0}));
    ParamStore grads;
    grads.add("theta", Tensor::vector({1.0}));
    AdamState state;
    state.hyper.learning_rate = 1e-3;
    adam_step(params, grads, state);
    CHECK(std::abs(params.get("theta").values[0] - (-1e-3)) <= 1e-9);
}

TEST_CASE("adam freeze contract") {
    ParamStore params;
    params.add("live", Tensor::vector({1.0}));
    params.add("ice", Tensor::vector({2.0}), /*frozen=*/true);
    AdamState state;

    SUBCASE("gradient for a frozen entry is an error") {
        ParamStore grads;
        grads.add("live", Tensor::vector({0.1}));
        grads.add("ice", Tensor::vector({0.1}));
        CHECK_THROWS_AS(adam_step(params, grads, state), InvalidArgument);
    }
    SUBCASE("frozen entries stay bitwise identical") {
        ParamStore grads;
        grads.add("live", Tensor::vector({0.1}));
        adam_step(params, grads, state);
        CHECK(params.get("ice").values[0] == 2.0);
        CHECK(params.get("live").values[0] != 1.0);
    }
    SUBCASE("missing gradient for a live entry is an error") {
        ParamStore grads;
        CHECK_THROWS_AS(adam_step(params, grads, state), InvalidArgument);
    }
    SUBCASE("shape mismatch is an error") {
        ParamStore grads;
        grads.add("live", Tensor::vector({0.1, 0.2}));
        CHECK_THROWS_AS(adam_step(params, grads, state), InvalidArgument);
    }
}

TEST_CASE("grad_check accepts the exact quadratic gradient") {
    ParamStore params;
    params.add("theta", Tensor::vector({0.5, -1.5, 2.0}));
    ParamStore grads;
    grads.add("theta", params.get("theta"));
    auto loss = [](const ParamStore& p) {
        double acc = 0.0;
        for (double v : p.get("theta").values) acc += 0.5 * v * v;
        return acc;
    };
    const auto report = grad_check(loss, params, grads, 1e-5, 1e-8);
    CHECK(report.passed());
    CHECK(report.max_rel_error() < 1e-8);
}

TEST_CASE("grad_check flags a doubled gradient with rel err near 1/3") {
    ParamStore params;
    params.add("theta", Tensor::vector({0.7, -0.9}));
    ParamStore grads;
    Tensor doubled = params.get("theta");
    for (double& v : doubled.values) v *= 2.0;
    grads.add("theta", doubled);
    auto loss = [](const ParamStore& p) {
        double acc = 0.0;
        for (double v : p.get("theta").values) acc += 0.5 * v * v;
        return acc;
    };
    const auto report = grad_check(loss, params, grads, 1e-5, 1e-4);
    CHECK(!report.passed());
    CHECK(report.max_rel_error() == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("grad_check detects a non-deterministic loss") {
    ParamStore params;
    params.add("theta", Tensor::vector({1.0}));
    ParamStore grads;
    grads.add("theta", Tensor::vector({1.0}));
    int calls = 0;
    auto loss = [&calls](const ParamStore&) { return static_cast<double>(++calls); };
    CHECK_THROWS_AS(grad_check(loss, params, grads, 1e-5, 1e-4), ContractViolation);
}

TEST_CASE("grad_check validates eps range") {
    ParamStore params;
    params.add("theta", Tensor::vector({1.0}));
    ParamStore grads;
    grads.add("theta", Tensor::vector({1.0}));
    auto loss = [](const ParamStore&) { return 0.0; };
    CHECK_THROWS_AS(grad_check(loss, params, grads, 1e-3, 1e-4), InvalidArgument);
}

TEST_CASE("KGAW1 round-trip is bit-exact and keeps frozen flags") {
    Rng rng(99);
    ParamStore store;
    store.add("alpha", Tensor({2, 3}, random_vector(rng, 6, -1e6, 1e6)));
    store.add("beta", Tensor::vector({1.0 / 3.0, -0.1, 2e-17}), /*frozen=*/true);
    store.add("gamma", Tensor({1, 2, 2}, random_vector(rng, 4)));

    const auto path = std::filesystem::temp_directory_path() / "kga_w1_roundtrip.txt";
    write_weights(store, path);
    const ParamStore loaded = read_weights(path);

    REQUIRE(loaded.names() == store.names());
    for (const auto& name : store.names()) {
        CHECK(loaded.get(name).shape == store.get(name).shape);
        CHECK(loaded.get(name).values == store.get(name).values);
        CHECK(loaded.is_frozen(name) == store.is_frozen(name));
    }
    std::filesystem::remove(path);
}

TEST_CASE("KGAW1 survives extreme values bit-exactly") {
    ParamStore store;
    store.add("edge", Tensor::vector({0.0, -0.0, 1e308, -1e308, 5e-324, -5e-324,
                                      2.2250738585072014e-308, 0.1, 1.0 / 3.0,
                                      9007199254740993.0}));
    Rng rng(2024);
    for (int i = 0; i < 8; ++i) {
        std::vector<double> values(16);
        for (double& v : values) {
            const int magnitude = static_cast<int>(rng.uniform_index(600)) - 300;
            v = rng.uniform(-1.0, 1.0) * std::pow(10.0, magnitude);
        }
        store.add("r" + std::to_string(i), Tensor::vector(values), i % 2 == 0);
    }
    const auto path = std::filesystem::temp_directory_path() / "kga_w1_extreme.txt";
    write_weights(store, path);
    const ParamStore loaded = read_weights(path);
    for (const auto& name : store.names()) {
        const auto& a = store.get(name).values;
        const auto& b = loaded.get(name).values;
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            // bitwise comparison distinguishes -0.0 from 0.0
            CHECK(std::signbit(a[i]) == std::signbit(b[i]));
            CHECK(a[i] == b[i]);
        }
        CHECK(loaded.is_frozen(name) == store.is_frozen(name));
    }
    std::filesystem::remove(path);
}

TEST_CASE("KGAW1 parse errors name the offending line") {
    const auto path = std::filesystem::temp_directory_path() / "kga_w1_bad.txt";
    {
        std::ofstream out(path);
        out << "KGAW1\n";
        out << "alpha 1 3\n";
        out << "1.0 2.0\n";  // one value short
    }
    CHECK_THROWS_WITH_AS(read_weights(path), doctest::Contains("line 3"), ParseError);
    {
        std::ofstream out(path);
        out << "NOPE\n";
    }
    CHECK_THROWS_AS(read_weights(path), ParseError);
    {
        std::ofstream out(path);
        out << "KGAW1\n";
        out << "alpha 1 2\n";
        out << "1.0 2.0\n";  // missing frozen trailer
    }
    CHECK_THROWS_AS(read_weights(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(Tensor::zeros({0}), InvalidArgument);
    CHECK_THROWS_AS(Tensor::zeros({3}).rows(), InvalidArgument);
}
