// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "splatlab/pearson.hpp"
#include "splatlab/tensor.hpp"

using namespace splatlab;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

TEST_CASE("sum backward gives all-ones gradient") {
    Tensor x = Tensor::from({3}, {4.0, -1.0, 2.5}, true);
    sum(x).backward();
    std::vector<double> g = x.grad();
    REQUIRE(g.size() == 3);
    for (double v : g) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sum of squares backward gives 2x") {
    Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
    sum(mul(x, x)).backward();
    std::vector<double> g = x.grad();
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(g[2] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward on a non-scalar output is rejected") {
    Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
    Tensor y = mul(x, 2.0);
    CHECK_THROWS_AS(y.backward(), ContractError);
}

TEST_CASE("backward accumulates additively until zero_grad") {
    Tensor x = Tensor::from({4}, {1.0, -2.0, 0.5, 3.0}, true);
    Tensor loss = sum(mul(x, x));
    loss.backward();
    std::vector<double> once = x.grad();
    loss.backward();
    std::vector<double> twice = x.grad();
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-14));
    x.zero_grad();
    for (double v : x.grad()) CHECK(v == 0.0);
}

TEST_CASE("correlation loss gradient matches central differences") {
    Rng rng(31);
    Tensor x = rand_tensor(rng, {16}, -1.0, 2.0);
    Tensor y = rand_tensor(rng, {16}, -1.0, 2.0);
    auto f = [](const std::vector<Tensor>& in) {
        return pearson_loss(PatchPair{in[0], in[1]}, 1e-8);
    };
    CHECK(check_gradients(f, {x, y}, 1e-5) < 1e-4);
}

TEST_CASE("check_gradients on mean squared error is tight") {
    Rng rng(7);
    Tensor a = rand_tensor(rng, {8}, -1.0, 1.0);
    Tensor b = rand_tensor(rng, {8}, -1.0, 1.0);
    auto f = [](const std::vector<Tensor>& in) { return mean(square(in[0] - in[1])); };
    CHECK(check_gradients(f, {a, b}, 1e-5) < 1e-6);
}

TEST_CASE("constant objective reports zero gradient error") {
    Rng rng(5);
    Tensor x = rand_tensor(rng, {6}, -1.0, 1.0);
    auto f = [](const std::vector<Tensor>& in) { return mul(sum(in[0]), 0.0); };
    CHECK(check_gradients(f, {x}, 1e-5) == 0.0);
}

TEST_CASE("correlation loss on a constant patch stays finite") {
    Tensor x = Tensor::full({8}, 2.0, true);
    Rng rng(11);
    Tensor y = rand_tensor(rng, {8}, 0.0, 1.0);
    Tensor loss = pearson_loss(PatchPair{x, y}, 1e-8);
    CHECK(std::isfinite(loss.value()));
    loss.backward();
    for (double g : x.grad()) CHECK(std::isfinite(g));
    for (double g : y.grad()) CHECK(std::isfinite(g));
}

namespace {

struct GradCase {
    std::string name;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    std::vector<Tensor> inputs;
};

std::vector<GradCase> make_cases(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCase> cases;
    Tensor a = rand_tensor(rng, {4, 5}, -2.0, 2.0);
    Tensor b = rand_tensor(rng, {4, 5}, -2.0, 2.0);
    Tensor pos = rand_tensor(rng, {4, 5}, 0.5, 2.0);
    cases.push_back({"add", [](const std::vector<Tensor>& in) { return mean(in[0] + in[1]); }, {a, b}});
    cases.push_back({"sub", [](const std::vector<Tensor>& in) { return mean(in[0] - in[1]); }, {a, b}});
    cases.push_back({"mul", [](const std::vector<Tensor>& in) { return mean(in[0] * in[1]); }, {a, b}});
    cases.push_back({"div", [](const std::vector<Tensor>& in) { return mean(in[0] / in[1]); }, {a, pos}});
    cases.push_back({"neg", [](const std::vector<Tensor>& in) { return mean(-in[0]); }, {a}});
    cases.push_back({"exp", [](const std::vector<Tensor>& in) { return mean(exp(in[0])); },
                     {rand_tensor(rng, {3, 4}, -1.0, 1.0)}});
    cases.push_back({"log", [](const std::vector<Tensor>& in) { return mean(log(in[0])); },
                     {rand_tensor(rng, {3, 4}, 0.5, 3.0)}});
    cases.push_back({"sqrt", [](const std::vector<Tensor>& in) { return mean(sqrt(in[0])); },
                     {rand_tensor(rng, {3, 4}, 0.5, 3.0)}});
    cases.push_back({"sigmoid", [](const std::vector<Tensor>& in) { return mean(sigmoid(in[0])); },
                     {rand_tensor(rng, {3, 4}, -3.0, 3.0)}});
    cases.push_back({"abs", [](const std::vector<Tensor>& in) { return mean(abs(in[0])); },
                     {rand_tensor(rng, {3, 4}, 0.3, 2.0)}});
    cases.push_back({"square", [](const std::vector<Tensor>& in) { return mean(square(in[0])); }, {a}});
    cases.push_back({"clamp_min_active",
                     [](const std::vector<Tensor>& in) { return mean(clamp_min(in[0], 0.0)); },
                     {rand_tensor(rng, {3, 4}, 0.2, 2.0)}});
    cases.push_back({"scalar_mix",
                     [](const std::vector<Tensor>& in) {
                         return mean(2.5 * in[0] + 1.2 - (3.0 - in[0]) / 1.7 + 2.0 / in[0]);
                     },
                     {rand_tensor(rng, {2, 6}, 0.5, 2.0)}});
    cases.push_back({"sum", [](const std::vector<Tensor>& in) { return sum(in[0]); }, {a}});
    cases.push_back({"mean", [](const std::vector<Tensor>& in) { return mean(in[0]); }, {a}});
    cases.push_back({"sum_last",
                     [](const std::vector<Tensor>& in) { return mean(sum_last(in[0])); },
                     {rand_tensor(rng, {6, 7}, -2.0, 2.0)}});
    cases.push_back({"mean_last",
                     [](const std::vector<Tensor>& in) { return mean(mean_last(in[0])); },
                     {rand_tensor(rng, {6, 7}, -2.0, 2.0)}});
    cases.push_back({"matmul",
                     [](const std::vector<Tensor>& in) { return mean(matmul(in[0], in[1])); },
                     {rand_tensor(rng, {3, 4}, -1.0, 1.0), rand_tensor(rng, {4, 2}, -1.0, 1.0)}});
    cases.push_back({"reshape",
                     [](const std::vector<Tensor>& in) {
                         return mean(square(reshape(in[0], {2, 12})));
                     },
                     {rand_tensor(rng, {4, 6}, -1.0, 1.0)}});
    std::vector<std::int64_t> idx = {5, 0, 3, 3, 11, 7};
    cases.push_back({"gather",
                     [idx](const std::vector<Tensor>& in) {
                         return mean(square(gather(in[0], idx)));
                     },
                     {rand_tensor(rng, {3, 4}, -1.0, 1.0)}});
    cases.push_back({"stack_scalars",
                     [](const std::vector<Tensor>& in) {
                         std::vector<Tensor> parts = {sum(in[0]), mean(in[0]), sum(square(in[0]))};
                         return mean(stack_scalars(parts));
                     },
                     {rand_tensor(rng, {5}, -1.0, 1.0)}});
    std::vector<double> kernel = {0.25, 0.5, 0.25};
    cases.push_back({"conv_rows_valid",
                     [kernel](const std::vector<Tensor>& in) {
                         return mean(square(conv_rows_valid(in[0], kernel)));
                     },
                     {rand_tensor(rng, {6, 8}, -1.0, 1.0)}});
    cases.push_back({"conv_cols_valid",
                     [kernel](const std::vector<Tensor>& in) {
                         return mean(square(conv_cols_valid(in[0], kernel)));
                     },
                     {rand_tensor(rng, {6, 8}, -1.0, 1.0)}});
    Tensor wide = rand_tensor(rng, {5, 6}, -2.0, 2.0);
    Tensor col = rand_tensor(rng, {5, 1}, 0.5, 2.0);
    cases.push_back({"broadcast_add",
                     [](const std::vector<Tensor>& in) { return mean(in[0] + in[1]); }, {wide, col}});
    cases.push_back({"broadcast_sub",
                     [](const std::vector<Tensor>& in) { return mean(in[0] - in[1]); }, {wide, col}});
    cases.push_back({"broadcast_mul",
                     [](const std::vector<Tensor>& in) { return mean(in[0] * in[1]); }, {wide, col}});
    cases.push_back({"broadcast_div",
                     [](const std::vector<Tensor>& in) { return mean(in[0] / in[1]); }, {wide, col}});
    return cases;
}

}  // namespace

TEST_CASE("every differentiable op passes finite-difference checks over 10 seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (GradCase& c : make_cases(seed)) {
            INFO("op " << c.name << " seed " << seed);
            CHECK(check_gradients(c.f, c.inputs, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("clamp_min blocks gradient below the floor") {
    Tensor x = Tensor::from({3}, {-1.0, 0.5, 2.0}, true);
    sum(clamp_min(x, 0.0)).backward();
    std::vector<double> g = x.grad();
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("guarded statistics stay finite on constant inputs") {
    Tensor x = Tensor::full({10}, 3.0, true);
    Tensor centered = x - mean(x);
    Tensor sd = sqrt(mean(square(centered)));
    Tensor z = centered / (sd + 1e-8);
    Tensor loss = mean(square(z));
    CHECK(all_finite(z));
    CHECK(std::isfinite(loss.value()));
    loss.backward();
    for (double g : x.grad()) CHECK(std::isfinite(g));
}

TEST_CASE("shape bookkeeping and scalar access") {
    Tensor x = Tensor::zeros({2, 3});
    CHECK(x.numel() == 6);
    CHECK(x.shape() == std::vector<int>{2, 3});
    CHECK(Tensor::scalar(4.25).value() == 4.25);
    CHECK_THROWS_AS(x.value(), ContractError);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), ContractError);
}
