// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "splatlab/depth_loss.hpp"
#include "splatlab/pearson.hpp"

using namespace splatlab;

namespace {

double brute_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double brute_std(const std::vector<double>& v) {
    double m = brute_mean(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = brute_mean(a), mb = brute_mean(b);
    double num = 0, sa = 0, sb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        sa += (a[i] - ma) * (a[i] - ma);
        sb += (b[i] - mb) * (b[i] - mb);
    }
    return num / (std::sqrt(sa) * std::sqrt(sb));
}

std::vector<double> random_values(Rng& rng, int n, double lo, double hi) {
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// redraw until comfortably non-constant
std::vector<double> spread_values(Rng& rng, int n, double min_std) {
    while (true) {
        std::vector<double> v = random_values(rng, n, -1.0, 1.0);
        if (brute_std(v) >= min_std) return v;
    }
}

DepthMap map_of(int h, int w, std::vector<double> v, bool rg = false) {
    return DepthMap::from_values(h, w, std::move(v), rg);
}

}  // namespace

TEST_CASE("normalize_local zeroes a constant patch under the guard") {
    Tensor p = Tensor::from({1, 4}, {1.0, 1.0, 1.0, 1.0});
    Tensor out = normalize_local(p, 1e-8);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("normalize_local z-scores [0,2] to [-1,1] at eps 0") {
    Tensor p = Tensor::from({1, 2}, {0.0, 2.0});
    Tensor out = normalize_local(p, 0.0);
    CHECK(out.data()[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(out.data()[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normalize_local is invariant to positive affine maps at eps 0") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v = spread_values(rng, 16, 0.1);
        std::vector<double> w(v.size());
        double a = rng.uniform(0.2, 3.0), b = rng.uniform(-2.0, 2.0);
        for (size_t i = 0; i < v.size(); ++i) w[i] = a * v[i] + b;
        Tensor z1 = normalize_local(Tensor::from({1, 16}, v), 0.0);
        Tensor z2 = normalize_local(Tensor::from({1, 16}, w), 0.0);
        for (size_t i = 0; i < v.size(); ++i)
            CHECK(z1.data()[i] == doctest::Approx(z2.data()[i]).epsilon(1e-10));
    }
}

TEST_CASE("loss_local vanishes on identical and positive-affine grids") {
    Rng rng(10);
    DepthMap dr = map_of(8, 8, spread_values(rng, 64, 0.2));
    PatchGrid pr = unfold(dr, 4);
    CHECK(loss_local(pr, pr, 1e-8).value() == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<double> shifted(64);
    for (int i = 0; i < 64; ++i) shifted[i] = 3.0 * dr.values.data()[i] + 5.0;
    PatchGrid pp = unfold(map_of(8, 8, shifted), 4);
    CHECK(loss_local(pr, pp, 0.0).value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("per-patch local loss equals 2(1 - pearson) at eps 0 over 1000 pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a = spread_values(rng, 4, 0.05);
        std::vector<double> b = spread_values(rng, 4, 0.05);
        PatchGrid pa = unfold(map_of(2, 2, a), 2);
        PatchGrid pb = unfold(map_of(2, 2, b), 2);
        double lhs = loss_local(pa, pb, 0.0).value();
        double rhs = 2.0 * (1.0 - brute_pearson(a, b));
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("loss_global vanishes on identity and under homogeneous scaling") {
    Rng rng(12);
    DepthMap dr = map_of(8, 8, spread_values(rng, 64, 0.2));
    PatchGrid pr = unfold(dr, 4);
    CHECK(loss_global(pr, pr, dr, dr, 1e-8).value() == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<double> scaled(64);
    for (int i = 0; i < 64; ++i) scaled[i] = 2.5 * dr.values.data()[i];
    DepthMap dp = map_of(8, 8, scaled);
    PatchGrid pp = unfold(dp, 4);
    CHECK(loss_global(pr, pp, dr, dp, 0.0).value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("loss_global matches the frozen two-patch golden value") {
    // rendered patches [0,0,0,2] and [0,0,0,6]; prior differs only in the
    // second patch, [0,0,0,3]; scale 2 over a 2x4 map, eps 0
    DepthMap dr = map_of(2, 4, {0, 0, 0, 0, 0, 2, 0, 6});
    DepthMap dp = map_of(2, 4, {0, 0, 0, 0, 0, 2, 0, 3});
    PatchGrid pr = unfold(dr, 2);
    PatchGrid pp = unfold(dp, 2);
    double got = loss_global(pr, pp, dr, dp, 0.0).value();
    CHECK(got == doctest::Approx(0.068446735623959309).epsilon(1e-12));

    // cross-check against an in-test brute-force evaluation
    double sr = brute_std(dr.values.data()), sp = brute_std(dp.values.data());
    int pidx[2][4] = {{0, 1, 4, 5}, {2, 3, 6, 7}};
    double total = 0;
    for (int k = 0; k < 2; ++k) {
        std::vector<double> a, b;
        for (int t = 0; t < 4; ++t) {
            a.push_back(dr.values.data()[pidx[k][t]]);
            b.push_back(dp.values.data()[pidx[k][t]]);
        }
        double ma = brute_mean(a), mb = brute_mean(b), mse = 0;
        for (int t = 0; t < 4; ++t) {
            double d = (a[t] - ma) / sr - (b[t] - mb) / sp;
            mse += d * d;
        }
        total += mse / 4.0;
    }
    CHECK(got == doctest::Approx(total / 2.0).epsilon(1e-14));
}

TEST_CASE("map_std matches the brute-force population std") {
    Rng rng(13);
    std::vector<double> v = random_values(rng, 60, -3.0, 7.0);
    DepthMap m = map_of(6, 10, v);
    CHECK(map_std(m).value() == doctest::Approx(brute_std(v)).epsilon(1e-13));
}

TEST_CASE("depth_loss vanishes on identical maps for varied configs") {
    // identity leaves only the eps guard's residual in the correlation term,
    // bounded by w_p * eps / (patch sum of squares) ~ 1e-10
    Rng rng(14);
    DepthMap d = map_of(32, 32, spread_values(rng, 32 * 32, 0.2));
    LossConfig cfg;
    CHECK(depth_loss(d, d, cfg).value() < 1e-8);
    cfg.pcc_mode = PccMode::separate;
    CHECK(depth_loss(d, d, cfg).value() < 1e-8);
    cfg.pcc_mode = PccMode::folded;
    cfg.scales = {2, 8};
    cfg.w_local = 0.3;
    cfg.w_global = 0.7;
    CHECK(depth_loss(d, d, cfg).value() < 1e-8);
    cfg.w_p = 0.0;  // without the correlation term the identity is exact
    CHECK(depth_loss(d, d, cfg).value() == 0.0);
}

TEST_CASE("depth_loss degenerates to loss_local under a collapsed config") {
    Rng rng(15);
    DepthMap dr = map_of(8, 8, spread_values(rng, 64, 0.2));
    DepthMap dp = map_of(8, 8, spread_values(rng, 64, 0.2));
    LossConfig cfg;
    cfg.scales = {4};
    cfg.w_local = 1.0;
    cfg.w_global = 0.0;
    cfg.w_p = 0.0;
    double via_depth = depth_loss(dr, dp, cfg).value();
    double direct = loss_local(unfold(dr, 4), unfold(dp, 4), cfg.eps).value();
    CHECK(via_depth == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("multi-scale depth_loss is the mean of its single-scale restrictions") {
    Rng rng(16);
    DepthMap dr = map_of(16, 16, spread_values(rng, 256, 0.2));
    DepthMap dp = map_of(16, 16, spread_values(rng, 256, 0.2));
    for (PccMode mode : {PccMode::folded, PccMode::separate}) {
        LossConfig cfg;
        cfg.pcc_mode = mode;
        cfg.scales = {4, 8};
        LossConfig c4 = cfg, c8 = cfg;
        c4.scales = {4};
        c8.scales = {8};
        double both = depth_loss(dr, dp, cfg).value();
        double avg = 0.5 * (depth_loss(dr, dp, c4).value() + depth_loss(dr, dp, c8).value());
        CHECK(both == doctest::Approx(avg).epsilon(1e-13));
    }
}

TEST_CASE("depth_loss is invariant to positive affine prior maps near eps 0") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> base = spread_values(rng, 32 * 32, 0.1);
        DepthMap dr = map_of(32, 32, spread_values(rng, 32 * 32, 0.1));
        DepthMap dp = map_of(32, 32, base);
        double a = rng.uniform(0.2, 3.0), b = rng.uniform(-2.0, 2.0);
        std::vector<double> mapped(base.size());
        for (size_t i = 0; i < base.size(); ++i) mapped[i] = a * base[i] + b;
        DepthMap dp2 = map_of(32, 32, mapped);
        LossConfig cfg;  // eps 1e-8, scales {4,8,16}
        double l1 = depth_loss(dr, dp, cfg).value();
        double l2 = depth_loss(dr, dp2, cfg).value();
        CHECK(std::abs(l1 - l2) < 1e-6);
    }
}

TEST_CASE("component losses are non-negative") {
    Rng rng(18);
    for (int trial = 0; trial < 10; ++trial) {
        DepthMap dr = map_of(16, 16, random_values(rng, 256, 0.0, 5.0));
        DepthMap dp = map_of(16, 16, random_values(rng, 256, -2.0, 2.0));
        LossConfig cfg;
        cfg.scales = {2, 4, 8};
        CHECK(depth_loss(dr, dp, cfg).value() >= 0.0);
        CHECK(cascade_loss(dr, dp, cfg).value() >= 0.0);
        PatchGrid pr = unfold(dr, 4), pp = unfold(dp, 4);
        CHECK(loss_local(pr, pp, cfg.eps).value() >= 0.0);
        CHECK(loss_global(pr, pp, dr, dp, cfg.eps).value() >= 0.0);
    }
}

TEST_CASE("depth_loss gradients match finite differences") {
    Rng rng(19);
    std::vector<double> vr = spread_values(rng, 64, 0.2);
    std::vector<double> vp = spread_values(rng, 64, 0.2);
    for (PccMode mode : {PccMode::folded, PccMode::separate}) {
        LossConfig cfg;
        cfg.pcc_mode = mode;
        cfg.scales = {2, 4};
        auto f = [&cfg](const std::vector<Tensor>& in) {
            DepthMap a = DepthMap::from_tensor(8, 8, in[0]);
            DepthMap b = DepthMap::from_tensor(8, 8, in[1]);
            return depth_loss(a, b, cfg);
        };
        Tensor tr = Tensor::from({8, 8}, vr, true);
        Tensor tp = Tensor::from({8, 8}, vp, true);
        CHECK(check_gradients(f, {tr, tp}, 1e-5) < 1e-4);
    }
}

TEST_CASE("masked depth_loss with a full mask equals the unmasked loss") {
    Rng rng(20);
    DepthMap dr = map_of(16, 16, spread_values(rng, 256, 0.2));
    DepthMap dp = map_of(16, 16, spread_values(rng, 256, 0.2));
    std::vector<unsigned char> all(256, 1);
    LossConfig cfg;
    cfg.scales = {4, 8};
    CHECK(depth_loss_masked(dr, dp, all, cfg).value() ==
          doctest::Approx(depth_loss(dr, dp, cfg).value()).epsilon(1e-14));
}

TEST_CASE("masked depth_loss drops patches below half coverage") {
    Rng rng(21);
    DepthMap dr = map_of(8, 8, spread_values(rng, 64, 0.2));
    DepthMap dp = map_of(8, 8, spread_values(rng, 64, 0.2));
    LossConfig cfg;
    cfg.scales = {4};
    cfg.w_local = 1.0;
    cfg.w_global = 0.0;
    cfg.w_p = 0.0;

    // invalidate the entire top-left 4x4 patch: it must drop, leaving the
    // other three; compare against the mean of their per-patch losses
    std::vector<unsigned char> mask(64, 1);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) mask[static_cast<size_t>(i) * 8 + j] = 0;
    double masked = depth_loss_masked(dr, dp, mask, cfg).value();

    PatchGrid pr = unfold(dr, 4), pp = unfold(dp, 4);
    double manual = 0;
    for (int k = 1; k < 4; ++k) {
        std::vector<double> a(pr.patches.data().begin() + k * 16,
                              pr.patches.data().begin() + (k + 1) * 16);
        std::vector<double> b(pp.patches.data().begin() + k * 16,
                              pp.patches.data().begin() + (k + 1) * 16);
        PatchGrid ga = unfold(map_of(4, 4, a), 4);
        PatchGrid gb = unfold(map_of(4, 4, b), 4);
        manual += loss_local(ga, gb, cfg.eps).value();
    }
    CHECK(masked == doctest::Approx(manual / 3.0).epsilon(1e-12));

    // exactly half the pixels valid keeps the patch
    std::vector<unsigned char> half(64, 1);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) half[static_cast<size_t>(i) * 8 + j] = 0;
    CHECK(depth_loss_masked(dr, dp, half, cfg).value() ==
          doctest::Approx(depth_loss(dr, dp, cfg).value()).epsilon(1e-12));

    // nothing valid: every scale contributes zero
    std::vector<unsigned char> none(64, 0);
    CHECK(depth_loss_masked(dr, dp, none, cfg).value() == 0.0);
}

TEST_CASE("pearson_loss endpoint and golden values") {
    Tensor x = Tensor::from({4}, {1.0, 2.0, 3.0, 4.0});
    CHECK(pearson_loss(PatchPair{x, x}, 0.0).value() == doctest::Approx(0.0).epsilon(1e-14));

    Tensor z = Tensor::from({4}, {-1.5, -0.5, 0.5, 1.5});
    Tensor nz = Tensor::from({4}, {1.5, 0.5, -0.5, -1.5});
    CHECK(pearson_loss(PatchPair{z, nz}, 0.0).value() == doctest::Approx(2.0).epsilon(1e-14));

    Tensor y = Tensor::from({4}, {1.0, 2.0, 3.0, 5.0});
    double got = pearson_loss(PatchPair{x, y}, 0.0).value();
    CHECK(got == doctest::Approx(0.017292370176009375).epsilon(1e-12));
    CHECK(got == doctest::Approx(1.0 - brute_pearson(x.data(), y.data())).epsilon(1e-13));
}

TEST_CASE("pearson_loss rejects patches shorter than 2") {
    Tensor one = Tensor::from({1}, {3.0});
    CHECK_THROWS_AS(pearson_loss(PatchPair{one, one}, 1e-8), ContractError);
}

TEST_CASE("pearson_loss affine behavior over 1000 pairs") {
    // the eps guard perturbs the value by about eps * |1 - 1/a| / (N * sx * sy),
    // so a 1e-9 tolerance needs N * sx * sy well above 40; 64x64 patches with
    // std >= 0.1 give N * sx * sy >= 41
    Rng rng(22);
    const int n = 4096;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a = spread_values(rng, n, 0.1);
        std::vector<double> b = spread_values(rng, n, 0.1);
        double base = pearson_loss(PatchPair{Tensor::from({n}, a), Tensor::from({n}, b)}, 1e-8)
                          .value();
        double ga = rng.uniform(0.25, 3.0), gb = rng.uniform(-2.0, 2.0);
        std::vector<double> up(n), down(n);
        for (int i = 0; i < n; ++i) {
            up[i] = ga * b[i] + gb;
            down[i] = -ga * b[i] + gb;
        }
        double pos = pearson_loss(PatchPair{Tensor::from({n}, a), Tensor::from({n}, up)}, 1e-8)
                         .value();
        double negv = pearson_loss(PatchPair{Tensor::from({n}, a), Tensor::from({n}, down)}, 1e-8)
                          .value();
        CHECK(std::abs(pos - base) < 1e-9);
        CHECK(std::abs(negv - (2.0 - base)) < 1e-9);
    }
}

TEST_CASE("constant rendered patch reads as neutral correlation") {
    Rng rng(23);
    Tensor flat = Tensor::full({8}, 1.7);
    Tensor varying = Tensor::from({8}, spread_values(rng, 8, 0.2));
    double v = pearson_loss(PatchPair{flat, varying}, 1e-8).value();
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("noisier priors score a non-decreasing mean correlation loss") {
    Rng rng(24);
    double sums[3] = {0, 0, 0};
    const double sigmas[3] = {0.0, 0.1, 1.0};
    for (int seed = 0; seed < 100; ++seed) {
        std::vector<double> x = spread_values(rng, 16, 0.2);
        for (int k = 0; k < 3; ++k) {
            std::vector<double> y(16);
            for (int i = 0; i < 16; ++i) y[i] = x[i] + sigmas[k] * rng.normal();
            sums[k] += pearson_loss(PatchPair{Tensor::from({16}, x), Tensor::from({16}, y)}, 1e-8)
                           .value();
        }
    }
    CHECK(sums[0] <= sums[1]);
    CHECK(sums[1] <= sums[2]);
    CHECK(sums[0] < 1e-5);  // 100 accumulated eps-guard residuals
}

TEST_CASE("mean_patch_pearson averages the row-wise losses") {
    Rng rng(25);
    std::vector<double> a = spread_values(rng, 12, 0.1);
    std::vector<double> b = spread_values(rng, 12, 0.1);
    Tensor pa = Tensor::from({3, 4}, a);
    Tensor pb = Tensor::from({3, 4}, b);
    double manual = 0;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> ra(a.begin() + k * 4, a.begin() + (k + 1) * 4);
        std::vector<double> rb(b.begin() + k * 4, b.begin() + (k + 1) * 4);
        manual +=
            pearson_loss(PatchPair{Tensor::from({4}, ra), Tensor::from({4}, rb)}, 1e-8).value();
    }
    CHECK(mean_patch_pearson(pa, pb, 1e-8).value() ==
          doctest::Approx(manual / 3.0).epsilon(1e-13));
}

TEST_CASE("cascade_loss endpoints") {
    Rng rng(26);
    DepthMap d = map_of(32, 32, spread_values(rng, 32 * 32, 0.2));
    LossConfig cfg;
    CHECK(cascade_loss(d, d, cfg).value() < 1e-8);

    std::vector<double> mapped(32 * 32);
    for (size_t i = 0; i < mapped.size(); ++i) mapped[i] = 2.0 * d.values.data()[i] + 1.0;
    LossConfig pure = cfg;
    pure.w_l2 = 0.0;
    CHECK(cascade_loss(d, map_of(32, 32, mapped), pure).value() ==
          doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cascade_loss equals the hand-composed per-scale average") {
    Rng rng(27);
    DepthMap dr = map_of(32, 32, spread_values(rng, 32 * 32, 0.2));
    DepthMap dp = map_of(32, 32, spread_values(rng, 32 * 32, 0.2));
    LossConfig cfg;  // scales {4,8,16}, w_p 0.1, w_l2 0.9
    double manual = 0;
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s), pp = unfold(dp, s);
        double pc = mean_patch_pearson(pr.patches, pp.patches, cfg.eps).value();
        double l2 = loss_local(pr, pp, cfg.eps).value();
        manual += cfg.w_p * pc + cfg.w_l2 * l2;
    }
    manual /= static_cast<double>(cfg.scales.size());
    CHECK(cascade_loss(dr, dp, cfg).value() == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("separate mode adds the cascade term to the pure hierarchical loss") {
    Rng rng(28);
    DepthMap dr = map_of(16, 16, spread_values(rng, 256, 0.2));
    DepthMap dp = map_of(16, 16, spread_values(rng, 256, 0.2));
    LossConfig cfg;
    cfg.scales = {4, 8};
    cfg.pcc_mode = PccMode::separate;
    double got = depth_loss(dr, dp, cfg).value();

    double manual = 0;
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s), pp = unfold(dp, s);
        double ll = loss_local(pr, pp, cfg.eps).value();
        double lg = loss_global(pr, pp, dr, dp, cfg.eps).value();
        double pc = mean_patch_pearson(pr.patches, pp.patches, cfg.eps).value();
        manual += cfg.w_local * ll + cfg.w_global * lg + cfg.w_p * pc + cfg.w_l2 * ll;
    }
    manual /= static_cast<double>(cfg.scales.size());
    CHECK(got == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("folded mode blends correlation into both normalization terms") {
    Rng rng(29);
    DepthMap dr = map_of(16, 16, spread_values(rng, 256, 0.2));
    DepthMap dp = map_of(16, 16, spread_values(rng, 256, 0.2));
    LossConfig cfg;
    cfg.scales = {4, 8};
    double got = depth_loss(dr, dp, cfg).value();

    double manual = 0;
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s), pp = unfold(dp, s);
        double ll = loss_local(pr, pp, cfg.eps).value();
        double lg = loss_global(pr, pp, dr, dp, cfg.eps).value();
        double pc = mean_patch_pearson(pr.patches, pp.patches, cfg.eps).value();
        manual += cfg.w_local * (cfg.w_p * pc + cfg.w_l2 * ll) +
                  cfg.w_global * (cfg.w_p * pc + cfg.w_l2 * lg);
    }
    manual /= static_cast<double>(cfg.scales.size());
    CHECK(got == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("global image-level correlation baseline") {
    Rng rng(30);
    std::vector<double> v = spread_values(rng, 64, 0.2);
    DepthMap dr = map_of(8, 8, v);
    std::vector<double> mapped(64);
    for (int i = 0; i < 64; ++i) mapped[i] = 4.0 * v[i] - 2.0;
    DepthMap dp = map_of(8, 8, mapped);
    std::vector<unsigned char> all(64, 1);
    CHECK(global_pearson_loss(dr, dp, all, 1e-8).value() == doctest::Approx(0.0).epsilon(1e-9));

    // under 2 valid pixels: neutral zero
    std::vector<unsigned char> one(64, 0);
    one[5] = 1;
    CHECK(global_pearson_loss(dr, dp, one, 1e-8).value() == 0.0);

    // restricted to a mask, equals the brute-force value over masked pixels
    std::vector<unsigned char> half(64, 0);
    for (int i = 0; i < 32; ++i) half[i] = 1;
    std::vector<double> ma(v.begin(), v.begin() + 32);
    std::vector<double> mb;
    DepthMap noisy = map_of(8, 8, spread_values(rng, 64, 0.2));
    for (int i = 0; i < 32; ++i) mb.push_back(noisy.values.data()[i]);
    CHECK(global_pearson_loss(dr, noisy, half, 1e-8).value() ==
          doctest::Approx(1.0 - brute_pearson(ma, mb)).epsilon(1e-9));
}

TEST_CASE("loss config validation rejects bad fields") {
    LossConfig cfg;
    cfg.eps = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LossConfig{};
    cfg.scales = {8, 4};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LossConfig{};
    cfg.scales = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LossConfig{};
    cfg.w_local = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LossConfig{};
    cfg.lambda_ssim = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(LossConfig{}.validate());
}
