// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/metrics.hpp"

#include <cmath>

namespace splatlab {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

void check_same(const ImageRGB& a, const ImageRGB& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw ContractError(std::string(what) + ": image sizes differ");
}

// Valid-mode separable blur of one channel plane; out is (H-k+1) x (W-k+1).
std::vector<double> blur_valid(const std::vector<double>& plane, int h, int w,
                               const std::vector<double>& win) {
    const int k = static_cast<int>(win.size());
    const int ow = w - k + 1, oh = h - k + 1;
    std::vector<double> rows(static_cast<size_t>(h) * ow);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += plane[static_cast<size_t>(i) * w + j + t] * win[static_cast<size_t>(t)];
            rows[static_cast<size_t>(i) * ow + j] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += rows[static_cast<size_t>(i + t) * ow + j] * win[static_cast<size_t>(t)];
            out[static_cast<size_t>(i) * ow + j] = acc;
        }
    return out;
}

}  // namespace

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> win(static_cast<size_t>(size));
    const double mid = (size - 1) * 0.5;
    double total = 0;
    for (int i = 0; i < size; ++i) {
        win[static_cast<size_t>(i)] = std::exp(-0.5 * (i - mid) * (i - mid) / (sigma * sigma));
        total += win[static_cast<size_t>(i)];
    }
    for (double& v : win) v /= total;
    return win;
}

double psnr(const ImageRGB& a, const ImageRGB& b) {
    check_same(a, b, "psnr");
    const auto& av = a.values.data();
    const auto& bv = b.values.data();
    double mse = 0;
    for (size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        mse += d * d;
    }
    mse /= static_cast<double>(av.size());
    if (mse <= 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageRGB& a, const ImageRGB& b) {
    check_same(a, b, "ssim");
    const int h = a.height, w = a.width;
    if (h < kWindow || w < kWindow)
        throw ContractError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                            " smaller than the " + std::to_string(kWindow) + "-pixel window");
    const auto win = gaussian_window(kWindow, kWindowSigma);
    const auto& av = a.values.data();
    const auto& bv = b.values.data();
    const size_t n = static_cast<size_t>(h) * w;

    double total = 0;
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
        for (size_t i = 0; i < n; ++i) {
            const double x = av[i * 3 + static_cast<size_t>(ch)];
            const double y = bv[i * 3 + static_cast<size_t>(ch)];
            pa[i] = x;
            pb[i] = y;
            paa[i] = x * x;
            pbb[i] = y * y;
            pab[i] = x * y;
        }
        const auto mu_a = blur_valid(pa, h, w, win);
        const auto mu_b = blur_valid(pb, h, w, win);
        const auto e_aa = blur_valid(paa, h, w, win);
        const auto e_bb = blur_valid(pbb, h, w, win);
        const auto e_ab = blur_valid(pab, h, w, win);
        double acc = 0;
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / 3.0;
}

std::optional<double> depth_pearson(const DepthMap& a, const DepthMap& b,
                                    const std::vector<unsigned char>& mask) {
    if (a.height != b.height || a.width != b.width)
        throw ContractError("depth_pearson: map sizes differ");
    if (mask.size() != static_cast<size_t>(a.height) * a.width)
        throw ContractError("depth_pearson: mask size mismatch");
    const auto& av = a.values.data();
    const auto& bv = b.values.data();
    double sx = 0, sy = 0;
    std::int64_t count = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            sx += av[i];
            sy += bv[i];
            ++count;
        }
    if (count < 2) return std::nullopt;
    const double mx = sx / static_cast<double>(count), my = sy / static_cast<double>(count);
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            const double dx = av[i] - mx, dy = bv[i] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    if (sxx <= 0 || syy <= 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace splatlab
