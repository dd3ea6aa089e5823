// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "splatlab/gaussians.hpp"

using namespace splatlab;

namespace {

// test-local cyclic Jacobi eigensolver for symmetric 3x3 matrices
std::array<double, 3> eigenvalues3(std::array<double, 9> m) {
    auto matmul3 = [](const std::array<double, 9>& a, const std::array<double, 9>& b) {
        std::array<double, 9> r{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
        return r;
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = std::abs(m[1]) + std::abs(m[2]) + std::abs(m[5]);
        if (off < 1e-15) break;
        const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        for (const int* pq : pairs) {
            int p = pq[0], q = pq[1];
            if (std::abs(m[p * 3 + q]) < 1e-18) continue;
            double theta = 0.5 * std::atan2(2.0 * m[p * 3 + q], m[q * 3 + q] - m[p * 3 + p]);
            std::array<double, 9> g = {1, 0, 0, 0, 1, 0, 0, 0, 1};
            double c = std::cos(theta), s = std::sin(theta);
            g[p * 3 + p] = c;
            g[q * 3 + q] = c;
            g[p * 3 + q] = s;
            g[q * 3 + p] = -s;
            std::array<double, 9> gt = g;
            std::swap(gt[1], gt[3]);
            std::swap(gt[2], gt[6]);
            std::swap(gt[5], gt[7]);
            m = matmul3(gt, matmul3(m, g));
        }
    }
    std::array<double, 3> ev = {m[0], m[4], m[8]};
    std::sort(ev.begin(), ev.end());
    return ev;
}

std::array<double, 9> to_array9(const Tensor& t) {
    std::array<double, 9> a{};
    for (int i = 0; i < 9; ++i) a[i] = t.data()[i];
    return a;
}

GaussianCloud single_gaussian(const std::array<double, 3>& mean, double log_scale,
                              double opacity_logit) {
    GaussianCloud c = GaussianCloud::create(1, 0, true);
    std::vector<double>& m = c.means.mutable_data();
    for (int i = 0; i < 3; ++i) m[i] = mean[i];
    std::vector<double>& ls = c.log_scales.mutable_data();
    for (int i = 0; i < 3; ++i) ls[i] = log_scale;
    c.opacity_logits.mutable_data()[0] = opacity_logit;
    return c;
}

std::string temp_file(const char* stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("covariance of the identity rotation and unit scales is identity") {
    Tensor q = Tensor::from({4}, {1.0, 0.0, 0.0, 0.0});
    Tensor ls = Tensor::zeros({3});
    Tensor cov = covariance(q, ls);
    const std::vector<double>& v = cov.data();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(v[static_cast<size_t>(i) * 3 + j] ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));
}

TEST_CASE("axis-aligned covariance squares the scales") {
    Tensor q = Tensor::from({4}, {1.0, 0.0, 0.0, 0.0});
    Tensor ls = Tensor::from({3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
    Tensor cov = covariance(q, ls);
    CHECK(cov.data()[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(cov.data()[4] == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(cov.data()[8] == doctest::Approx(9.0).epsilon(1e-13));
    CHECK(cov.data()[1] == 0.0);
}

TEST_CASE("rotation preserves covariance eigenvalues") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        std::array<double, 4> qv;
        for (double& x : qv) x = rng.normal();
        Tensor q = Tensor::from({4}, {qv[0], qv[1], qv[2], qv[3]});
        std::array<double, 3> s;
        for (double& x : s) x = rng.uniform(0.3, 2.0);
        Tensor ls = Tensor::from({3}, {std::log(s[0]), std::log(s[1]), std::log(s[2])});
        Tensor cov = covariance(q, ls);

        std::array<double, 3> expect = {s[0] * s[0], s[1] * s[1], s[2] * s[2]};
        std::sort(expect.begin(), expect.end());
        std::array<double, 3> got = eigenvalues3(to_array9(cov));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - expect[i]) < 1e-10);

        // exact symmetry, bitwise
        const std::vector<double>& v = cov.data();
        CHECK(v[1] == v[3]);
        CHECK(v[2] == v[6]);
        CHECK(v[5] == v[7]);
        CHECK(got[0] >= -1e-12);
    }
}

TEST_CASE("covariance gradients match finite differences") {
    Rng rng(42);
    Tensor q = Tensor::from({4}, {0.9, 0.2, -0.3, 0.1}, true);
    std::vector<double> lsv = {std::log(0.5), std::log(1.5), std::log(0.8)};
    Tensor ls = Tensor::from({3}, lsv, true);
    auto f = [](const std::vector<Tensor>& in) { return mean(square(covariance(in[0], in[1]))); };
    CHECK(check_gradients(f, {q, ls}, 1e-5) < 1e-4);
}

TEST_CASE("on-axis projection lands on the principal point") {
    Camera cam = Camera::make(64, 64, 100.0, 100.0, 32.0, 32.0, {1, 0, 0, 0, 1, 0, 0, 0, 1},
                              {0, 0, 0});
    GaussianCloud c = single_gaussian({0.0, 0.0, 2.0}, std::log(0.05), 0.0);
    auto p = project(c, 0, cam);
    REQUIRE(p.has_value());
    CHECK(p->mu.data()[0] == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(p->mu.data()[1] == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(p->z.value() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("isotropic on-axis footprint is (f sigma / z)^2 plus the floor") {
    const double sigma = 0.04, z = 2.0, f = 100.0;
    Camera cam = Camera::make(64, 64, f, f, 32.0, 32.0, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0});
    GaussianCloud c = single_gaussian({0.0, 0.0, z}, std::log(sigma), 0.0);
    auto p = project(c, 0, cam);
    REQUIRE(p.has_value());
    double expect = (f * sigma / z) * (f * sigma / z) + kLowpassFloor;
    CHECK(p->sigma.data()[0] == doctest::Approx(expect).epsilon(1e-10));
    CHECK(p->sigma.data()[3] == doctest::Approx(expect).epsilon(1e-10));
    CHECK(p->sigma.data()[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("projected center gradient w.r.t. the mean matches finite differences") {
    Camera cam = Camera::look_at(48, 48, 60.0, {0.5, -0.3, -3.0}, {0.0, 0.0, 0.0},
                                 {0.0, 1.0, 0.0});
    GaussianCloud base = GaussianCloud::create(1, 0, true);
    auto f = [&cam](const std::vector<Tensor>& in) {
        GaussianCloud c = GaussianCloud::create(1, 0, false);
        c.means = in[0];
        c.rotations = in[1];
        c.log_scales = in[2];
        c.opacity_logits = in[3];
        auto p = project(c, 0, cam);
        REQUIRE(p.has_value());
        return sum(p->mu) + sum(p->sigma) + p->z + p->alpha;
    };
    Tensor means = Tensor::from({1, 3}, {0.2, -0.1, 0.4}, true);
    Tensor rot = Tensor::from({1, 4}, {0.9, 0.1, -0.2, 0.15}, true);
    Tensor ls = Tensor::from({1, 3}, {std::log(0.1), std::log(0.2), std::log(0.15)}, true);
    Tensor op = Tensor::from({1}, {0.3}, true);
    CHECK(check_gradients(f, {means, rot, ls, op}, 1e-5) < 1e-4);
}

TEST_CASE("principal point shifts translate the projection only") {
    std::array<double, 9> r = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Camera cam1 = Camera::make(64, 64, 80.0, 80.0, 30.0, 28.0, r, {0, 0, 0});
    Camera cam2 = Camera::make(64, 64, 80.0, 80.0, 30.0 + 5.0, 28.0 - 3.0, r, {0, 0, 0});
    GaussianCloud c = single_gaussian({0.3, -0.2, 2.5}, std::log(0.08), 0.4);
    auto p1 = project(c, 0, cam1);
    auto p2 = project(c, 0, cam2);
    REQUIRE(p1.has_value());
    REQUIRE(p2.has_value());
    CHECK(p2->mu.data()[0] == doctest::Approx(p1->mu.data()[0] + 5.0).epsilon(1e-12));
    CHECK(p2->mu.data()[1] == doctest::Approx(p1->mu.data()[1] - 3.0).epsilon(1e-12));
    for (int i = 0; i < 4; ++i)
        CHECK(p2->sigma.data()[i] == doctest::Approx(p1->sigma.data()[i]).epsilon(1e-14));
}

TEST_CASE("gaussians at or behind the near plane are culled") {
    Camera cam = Camera::make(64, 64, 80.0, 80.0, 32.0, 32.0, {1, 0, 0, 0, 1, 0, 0, 0, 1},
                              {0, 0, 0});
    CHECK_FALSE(project(single_gaussian({0, 0, -1.0}, -3.0, 0.0), 0, cam).has_value());
    CHECK_FALSE(project(single_gaussian({0, 0, 0.0}, -3.0, 0.0), 0, cam).has_value());
    CHECK_FALSE(project(single_gaussian({0, 0, kZNear}, -3.0, 0.0), 0, cam).has_value());
    CHECK(project(single_gaussian({0, 0, 0.5}, -3.0, 0.0), 0, cam).has_value());
}

TEST_CASE("create builds a neutral differentiable cloud") {
    GaussianCloud c = GaussianCloud::create(5, 0, true);
    CHECK(c.size() == 5);
    CHECK(c.color_dim() == 3);
    CHECK(c.means.requires_grad());
    CHECK(c.rotations.data()[0] == 1.0);
    CHECK(c.opacity_logits.data()[2] == 0.0);
    GaussianCloud d1 = GaussianCloud::create(4, 1, false);
    CHECK(d1.color_dim() == 12);
    CHECK(d1.colors.shape() == std::vector<int>{4, 12});
    CHECK_FALSE(d1.means.requires_grad());
}

TEST_CASE("renormalize_rotations restores unit quaternions") {
    GaussianCloud c = GaussianCloud::create(3, 0, true);
    std::vector<double>& q = c.rotations.mutable_data();
    Rng rng(43);
    for (double& x : q) x = rng.uniform(-2.0, 2.0);
    c.renormalize_rotations();
    for (int i = 0; i < 3; ++i) {
        double n2 = 0;
        for (int k = 0; k < 4; ++k) n2 += q[i * 4 + k] * q[i * 4 + k];
        CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-12);
    }
}

TEST_CASE("detach copies data and drops the gradient requirement") {
    GaussianCloud c = GaussianCloud::create(2, 0, true);
    GaussianCloud d = c.detach();
    CHECK_FALSE(d.means.requires_grad());
    CHECK(d.means.data() == c.means.data());
    d.means.mutable_data()[0] = 99.0;
    CHECK(c.means.data()[0] != 99.0);
}

TEST_CASE("scene_extent is the max distance from the centroid") {
    GaussianCloud c = GaussianCloud::create(3, 0, false);
    std::vector<double>& m = c.means.mutable_data();
    // centroid (1, 0, 0); farthest point (4,0,0) at distance 3
    double pts[9] = {-1, 0, 0, 0, 0, 0, 4, 0, 0};
    for (int i = 0; i < 9; ++i) m[i] = pts[i];
    CHECK(scene_extent(c) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip is byte-exact") {
    Rng rng(44);
    GaussianCloud c = GaussianCloud::create(17, 1, true);
    for (Tensor t : c.parameters())
        for (double& x : t.mutable_data()) x = rng.uniform(-2.0, 2.0);

    std::string p1 = temp_file("splatlab_ckpt_a.bin");
    std::string p2 = temp_file("splatlab_ckpt_b.bin");
    save_checkpoint(p1, c);
    GaussianCloud back = load_checkpoint(p1);
    CHECK(back.size() == 17);
    CHECK(back.sh_degree == 1);
    CHECK(back.means.data() == c.means.data());
    CHECK(back.rotations.data() == c.rotations.data());
    CHECK(back.log_scales.data() == c.log_scales.data());
    CHECK(back.opacity_logits.data() == c.opacity_logits.data());
    CHECK(back.colors.data() == c.colors.data());
    CHECK_FALSE(back.means.requires_grad());

    save_checkpoint(p2, back);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(b1.size() == 8 + 4 + 8 + 4 + 17 * (3 + 4 + 3 + 1 + 12) * 8);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    std::string p = temp_file("splatlab_ckpt_bad.bin");
    std::ofstream out(p, std::ios::binary);
    out << "NOTACKPT";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(p), IoError);
    std::remove(p.c_str());
}
