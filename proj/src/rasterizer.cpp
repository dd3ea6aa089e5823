// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatlab {

namespace {

// exp(-quad/2) < 1/255 exactly when quad > 2*ln(255)
const double kQuadClip = 2.0 * std::log(255.0);

std::vector<std::int64_t> strided(int n, int stride, int offset) {
    std::vector<std::int64_t> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = static_cast<std::int64_t>(i) * stride + offset;
    return idx;
}

// Batched per-lane screen-space quantities, all {N} graph tensors.
struct Projected {
    Tensor ix, iy;        // pixel center of the splat
    Tensor ca, cb, cc;    // conic (inverse projected covariance) entries
    Tensor z;             // camera-space depth
    Tensor alpha;         // sigmoid(opacity)
    Tensor col[3];        // per-channel colors from SH
    // floored covariance entries as plain values, for footprint radii
    std::vector<double> cov_a, cov_b, cov_c;
};

Projected project_all(const GaussianCloud& cloud, const Camera& cam) {
    const int N = cloud.size();
    Tensor mx = gather(cloud.means, strided(N, 3, 0), {N});
    Tensor my = gather(cloud.means, strided(N, 3, 1), {N});
    Tensor mz = gather(cloud.means, strided(N, 3, 2), {N});

    const auto& A = cam.R_wc;
    const auto& t = cam.t_wc;
    Tensor xc = mul(mx, A[0]) + mul(my, A[1]) + mul(mz, A[2]) + t[0];
    Tensor yc = mul(mx, A[3]) + mul(my, A[4]) + mul(mz, A[5]) + t[1];
    Tensor zc = mul(mx, A[6]) + mul(my, A[7]) + mul(mz, A[8]) + t[2];
    // Keeps the arithmetic of culled lanes finite; visible lanes are untouched.
    Tensor zs = clamp_min(zc, kZNear);

    Tensor ix = cam.fx * (xc / zs) + cam.cx;
    Tensor iy = cam.fy * (yc / zs) + cam.cy;

    Tensor qw = gather(cloud.rotations, strided(N, 4, 0), {N});
    Tensor qx = gather(cloud.rotations, strided(N, 4, 1), {N});
    Tensor qy = gather(cloud.rotations, strided(N, 4, 2), {N});
    Tensor qz = gather(cloud.rotations, strided(N, 4, 3), {N});
    Tensor n2 = square(qw) + square(qx) + square(qy) + square(qz);

    Tensor r00 = 1.0 - 2.0 * ((square(qy) + square(qz)) / n2);
    Tensor r01 = 2.0 * ((qx * qy - qw * qz) / n2);
    Tensor r02 = 2.0 * ((qx * qz + qw * qy) / n2);
    Tensor r10 = 2.0 * ((qx * qy + qw * qz) / n2);
    Tensor r11 = 1.0 - 2.0 * ((square(qx) + square(qz)) / n2);
    Tensor r12 = 2.0 * ((qy * qz - qw * qx) / n2);
    Tensor r20 = 2.0 * ((qx * qz - qw * qy) / n2);
    Tensor r21 = 2.0 * ((qy * qz + qw * qx) / n2);
    Tensor r22 = 1.0 - 2.0 * ((square(qx) + square(qy)) / n2);

    Tensor s2x = exp(mul(gather(cloud.log_scales, strided(N, 3, 0), {N}), 2.0));
    Tensor s2y = exp(mul(gather(cloud.log_scales, strided(N, 3, 1), {N}), 2.0));
    Tensor s2z = exp(mul(gather(cloud.log_scales, strided(N, 3, 2), {N}), 2.0));

    const Tensor* R[3][3] = {{&r00, &r01, &r02}, {&r10, &r11, &r12}, {&r20, &r21, &r22}};
    auto world_cov = [&](int a, int b) {
        return s2x * (*R[a][0] * *R[b][0]) + s2y * (*R[a][1] * *R[b][1]) + s2z * (*R[a][2] * *R[b][2]);
    };
    Tensor w00 = world_cov(0, 0), w01 = world_cov(0, 1), w02 = world_cov(0, 2);
    Tensor w11 = world_cov(1, 1), w12 = world_cov(1, 2), w22 = world_cov(2, 2);

    // M = R_wc * Sigma * R_wc^T, expanded over the six unique entries.
    const int fi[6] = {0, 0, 0, 1, 1, 2};
    const int fj[6] = {0, 1, 2, 1, 2, 2};
    const Tensor* wents[6] = {&w00, &w01, &w02, &w11, &w12, &w22};
    auto cam_cov = [&](int a, int b) {
        Tensor out;
        bool first = true;
        for (int e = 0; e < 6; ++e) {
            const int i = fi[e], j = fj[e];
            const double coef = A[a * 3 + i] * A[b * 3 + j] + (i != j ? A[a * 3 + j] * A[b * 3 + i] : 0.0);
            if (coef == 0.0) continue;
            Tensor term = mul(*wents[e], coef);
            out = first ? term : out + term;
            first = false;
        }
        return first ? Tensor::zeros({N}) : out;
    };
    Tensor m00 = cam_cov(0, 0), m01 = cam_cov(0, 1), m02 = cam_cov(0, 2);
    Tensor m11 = cam_cov(1, 1), m12 = cam_cov(1, 2), m22 = cam_cov(2, 2);

    Tensor u = cam.fx / zs;
    Tensor v = cam.fy / zs;
    Tensor jx = neg(cam.fx * xc / square(zs));
    Tensor jy = neg(cam.fy * yc / square(zs));

    Tensor cov_a = u * (u * m00) + 2.0 * (u * (jx * m02)) + jx * (jx * m22) + kLowpassFloor;
    Tensor cov_b = u * (v * m01) + u * (jy * m02) + jx * (v * m12) + jx * (jy * m22);
    Tensor cov_c = v * (v * m11) + 2.0 * (v * (jy * m12)) + jy * (jy * m22) + kLowpassFloor;
    Tensor det = cov_a * cov_c - square(cov_b);  // >= kLowpassFloor^2 by construction

    Projected p;
    p.ix = ix;
    p.iy = iy;
    p.ca = cov_c / det;
    p.cb = neg(cov_b) / det;
    p.cc = cov_a / det;
    p.z = zc;
    p.alpha = sigmoid(cloud.opacity_logits);
    p.cov_a = cov_a.data();
    p.cov_b = cov_b.data();
    p.cov_c = cov_c.data();

    if (cloud.sh_degree == 0) {
        for (int ch = 0; ch < 3; ++ch)
            p.col[ch] = 0.5 + kSH0 * gather(cloud.colors, strided(N, 3, ch), {N});
    } else {
        const auto cc0 = cam.center();
        Tensor dx = mx - cc0[0];
        Tensor dy = my - cc0[1];
        Tensor dz = mz - cc0[2];
        Tensor dn = clamp_min(sqrt(square(dx) + square(dy) + square(dz)), kZNear);
        Tensor ux = dx / dn, uy = dy / dn, uz = dz / dn;
        for (int ch = 0; ch < 3; ++ch) {
            Tensor f0 = gather(cloud.colors, strided(N, 12, ch), {N});
            Tensor f1 = gather(cloud.colors, strided(N, 12, 3 + ch), {N});
            Tensor f2 = gather(cloud.colors, strided(N, 12, 6 + ch), {N});
            Tensor f3 = gather(cloud.colors, strided(N, 12, 9 + ch), {N});
            p.col[ch] = 0.5 + kSH0 * f0 - kSH1 * (uy * f1) + kSH1 * (uz * f2) - kSH1 * (ux * f3);
        }
    }
    return p;
}

struct TileLayout {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> candidates;  // per tile, lanes in front-to-back order
};

TileLayout build_tiles(const Projected& p, int height, int width) {
    const auto& zv = p.z.data();
    const int n = static_cast<int>(zv.size());
    std::vector<int> order;
    order.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        if (zv[static_cast<size_t>(i)] > kZNear) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double za = zv[static_cast<size_t>(a)], zb = zv[static_cast<size_t>(b)];
        return za != zb ? za < zb : a < b;
    });

    TileLayout layout;
    layout.tiles_x = (width + kTileSize - 1) / kTileSize;
    layout.tiles_y = (height + kTileSize - 1) / kTileSize;
    layout.candidates.assign(static_cast<size_t>(layout.tiles_x) * layout.tiles_y, {});

    const auto& ixv = p.ix.data();
    const auto& iyv = p.iy.data();
    for (int lane : order) {
        const size_t li = static_cast<size_t>(lane);
        const double a = p.cov_a[li], b = p.cov_b[li], c = p.cov_c[li];
        const double mid = 0.5 * (a - c);
        const double lam_max = 0.5 * (a + c) + std::sqrt(mid * mid + b * b);
        const double r = 3.0 * std::sqrt(lam_max);
        const double x = ixv[li], y = iyv[li];
        if (x + r < 0 || x - r > width - 1 || y + r < 0 || y - r > height - 1) continue;
        const int tx0 = std::max(0, static_cast<int>(std::floor((x - r) / kTileSize)));
        const int tx1 = std::min(layout.tiles_x - 1, static_cast<int>(std::floor((x + r) / kTileSize)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((y - r) / kTileSize)));
        const int ty1 = std::min(layout.tiles_y - 1, static_cast<int>(std::floor((y + r) / kTileSize)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                layout.candidates[static_cast<size_t>(ty) * layout.tiles_x + tx].push_back(lane);
    }
    return layout;
}

// One included contribution during a pixel walk, recorded for the backward
// suffix sweep.
struct Sample {
    int slot;  // index into the tile's candidate list
    double dx, dy, G, g, w, T;
};

// Walks one pixel's candidate list front to back. Returns final transmittance.
template <typename OnSample>
double walk_pixel(const std::vector<int>& cand, double px, double py, const double* ixv,
                  const double* iyv, const double* cav, const double* cbv, const double* ccv,
                  const double* av, OnSample&& on_sample) {
    double T = 1.0;
    for (size_t s = 0; s < cand.size(); ++s) {
        const size_t li = static_cast<size_t>(cand[s]);
        const double dx = px - ixv[li];
        const double dy = py - iyv[li];
        const double quad = cav[li] * dx * dx + 2.0 * cbv[li] * dx * dy + ccv[li] * dy * dy;
        if (quad > kQuadClip || quad < 0) continue;  // response below clip (or degenerate)
        const double G = std::exp(-0.5 * quad);
        double g = av[li] * G;
        if (g > kCompositeCap) g = kCompositeCap;
        const double testT = T * (1.0 - g);
        if (testT < kTransmittanceFloor) break;  // would cross the floor: excluded, stop
        on_sample(Sample{static_cast<int>(s), dx, dy, G, g, T * g, T});
        T = testT;
    }
    return T;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
    if (cloud.size() == 0) throw ContractError("render: empty cloud");
    if (!(cfg.eps_d > 0)) throw ConfigError("render: eps_d must be positive");
    const int H = cam.height, W = cam.width;

    Projected p = project_all(cloud, cam);
    TileLayout layout = build_tiles(p, H, W);

    const double* ixv = p.ix.data().data();
    const double* iyv = p.iy.data().data();
    const double* cav = p.ca.data().data();
    const double* cbv = p.cb.data().data();
    const double* ccv = p.cc.data().data();
    const double* zv = p.z.data().data();
    const double* av = p.alpha.data().data();
    const double* colv[3] = {p.col[0].data().data(), p.col[1].data().data(), p.col[2].data().data()};

    std::vector<double> out_color(static_cast<size_t>(H) * W * 3, 0.0);
    std::vector<double> out_depth(static_cast<size_t>(H) * W, 0.0);
    std::vector<double> out_alpha(static_cast<size_t>(H) * W, 0.0);

    const int n_tiles = layout.tiles_x * layout.tiles_y;
#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& cand = layout.candidates[static_cast<size_t>(tile)];
        const int tx = tile % layout.tiles_x, ty = tile / layout.tiles_x;
        const int i1 = std::min(H, (ty + 1) * kTileSize), j1 = std::min(W, (tx + 1) * kTileSize);
        for (int i = ty * kTileSize; i < i1; ++i)
            for (int j = tx * kTileSize; j < j1; ++j) {
                const size_t px = static_cast<size_t>(i) * W + j;
                double acc_c[3] = {0, 0, 0}, acc_d = 0, acc_a = 0;
                const double T = walk_pixel(cand, j, i, ixv, iyv, cav, cbv, ccv, av, [&](const Sample& s) {
                    const size_t li = static_cast<size_t>(cand[static_cast<size_t>(s.slot)]);
                    for (int ch = 0; ch < 3; ++ch) acc_c[ch] += s.w * colv[ch][li];
                    acc_d += s.w * zv[li];
                    acc_a += s.w;
                });
                for (int ch = 0; ch < 3; ++ch) out_color[px * 3 + ch] = acc_c[ch] + T * cfg.background[ch];
                out_depth[px] = acc_d;
                out_alpha[px] = acc_a;
            }
    }

    std::vector<Tensor> inputs = {p.ix, p.iy, p.ca, p.cb, p.cc, p.z, p.alpha, p.col[0], p.col[1], p.col[2]};
    auto backward = [inputs, layout = std::move(layout), bg = cfg.background, H,
                     W](const std::vector<const double*>& og, const std::vector<double*>& ig) {
        const double* g_color = og[0];
        const double* g_depth = og[1];
        const double* g_alpha = og[2];
        const double* ixv = inputs[0].data().data();
        const double* iyv = inputs[1].data().data();
        const double* cav = inputs[2].data().data();
        const double* cbv = inputs[3].data().data();
        const double* ccv = inputs[4].data().data();
        const double* zv = inputs[5].data().data();
        const double* av = inputs[6].data().data();
        const double* colv[3] = {inputs[7].data().data(), inputs[8].data().data(), inputs[9].data().data()};

        const int n_tiles = layout.tiles_x * layout.tiles_y;
        // Per-tile partial sums, merged serially afterwards so the result does
        // not depend on the thread count.
        std::vector<std::vector<std::array<double, 10>>> partial(static_cast<size_t>(n_tiles));
#pragma omp parallel for schedule(dynamic)
        for (int tile = 0; tile < n_tiles; ++tile) {
            const auto& cand = layout.candidates[static_cast<size_t>(tile)];
            if (cand.empty()) continue;
            auto& local = partial[static_cast<size_t>(tile)];
            local.assign(cand.size(), std::array<double, 10>{});
            std::vector<Sample> samples;
            const int tx = tile % layout.tiles_x, ty = tile / layout.tiles_x;
            const int i1 = std::min(H, (ty + 1) * kTileSize), j1 = std::min(W, (tx + 1) * kTileSize);
            for (int i = ty * kTileSize; i < i1; ++i)
                for (int j = tx * kTileSize; j < j1; ++j) {
                    const size_t px = static_cast<size_t>(i) * W + j;
                    const double gc[3] = {g_color ? g_color[px * 3] : 0.0,
                                          g_color ? g_color[px * 3 + 1] : 0.0,
                                          g_color ? g_color[px * 3 + 2] : 0.0};
                    const double gd = g_depth ? g_depth[px] : 0.0;
                    const double ga = g_alpha ? g_alpha[px] : 0.0;
                    if (gc[0] == 0 && gc[1] == 0 && gc[2] == 0 && gd == 0 && ga == 0) continue;

                    samples.clear();
                    const double T_fin = walk_pixel(cand, j, i, ixv, iyv, cav, cbv, ccv, av,
                                                    [&](const Sample& s) { samples.push_back(s); });
                    // Suffix sums over later contributions (background included
                    // for color) drive the transmittance chain rule.
                    double S_c[3] = {T_fin * bg[0], T_fin * bg[1], T_fin * bg[2]};
                    double S_d = 0.0, S_a = 0.0;
                    for (size_t si = samples.size(); si-- > 0;) {
                        const Sample& s = samples[si];
                        const size_t li = static_cast<size_t>(cand[static_cast<size_t>(s.slot)]);
                        auto& acc = local[static_cast<size_t>(s.slot)];
                        const double inv_om = 1.0 / (1.0 - s.g);
                        double dg = 0.0;
                        for (int ch = 0; ch < 3; ++ch) {
                            dg += gc[ch] * (s.T * colv[ch][li] - S_c[ch] * inv_om);
                            acc[7 + ch] += gc[ch] * s.w;  // d color_ch
                        }
                        dg += gd * (s.T * zv[li] - S_d * inv_om);
                        dg += ga * (s.T - S_a * inv_om);
                        acc[5] += gd * s.w;  // d z
                        if (av[li] * s.G < kCompositeCap) {
                            acc[6] += dg * s.G;  // d alpha
                            const double dquad = -0.5 * s.G * (dg * av[li]);
                            acc[2] += dquad * s.dx * s.dx;        // d conic a
                            acc[3] += dquad * 2.0 * s.dx * s.dy;  // d conic b
                            acc[4] += dquad * s.dy * s.dy;        // d conic c
                            const double ddx = dquad * 2.0 * (cav[li] * s.dx + cbv[li] * s.dy);
                            const double ddy = dquad * 2.0 * (cbv[li] * s.dx + ccv[li] * s.dy);
                            acc[0] -= ddx;  // d ix (dx = px - ix)
                            acc[1] -= ddy;  // d iy
                        }
                        for (int ch = 0; ch < 3; ++ch) S_c[ch] += s.w * colv[ch][li];
                        S_d += s.w * zv[li];
                        S_a += s.w;
                    }
                }
        }
        for (int tile = 0; tile < n_tiles; ++tile) {
            const auto& cand = layout.candidates[static_cast<size_t>(tile)];
            const auto& local = partial[static_cast<size_t>(tile)];
            if (local.empty()) continue;
            for (size_t s = 0; s < cand.size(); ++s) {
                const size_t li = static_cast<size_t>(cand[s]);
                for (int f = 0; f < 10; ++f)
                    if (ig[static_cast<size_t>(f)]) ig[static_cast<size_t>(f)][li] += local[s][static_cast<size_t>(f)];
            }
        }
    };

    auto outs = make_custom_op(inputs, {{H, W, 3}, {H, W}, {H, W}},
                               {std::move(out_color), std::move(out_depth), std::move(out_alpha)},
                               std::move(backward));

    Tensor depth = cfg.normalize_depth ? outs[1] / clamp_min(outs[2], cfg.eps_d) : outs[1];
    RenderOutput out;
    out.color = ImageRGB::from_tensor(H, W, outs[0]);
    out.depth = DepthMap::from_tensor(H, W, depth);
    out.alpha_acc = outs[2];
    return out;
}

}  // namespace splatlab
