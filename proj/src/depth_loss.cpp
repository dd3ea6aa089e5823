// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/depth_loss.hpp"

#include <string>

#include "splatlab/pearson.hpp"

namespace splatlab {

namespace {

void check_same_maps(const DepthMap& a, const DepthMap& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw ContractError(std::string(what) + ": map sizes differ, " + std::to_string(a.height) + "x" +
                            std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                            std::to_string(b.width));
}

void check_same_grids(const PatchGrid& a, const PatchGrid& b, const char* what) {
    if (a.scale != b.scale || a.rows != b.rows || a.cols != b.cols)
        throw ContractError(std::string(what) + ": patch grids differ (scale " + std::to_string(a.scale) +
                            " vs " + std::to_string(b.scale) + ", " + std::to_string(a.patch_count()) +
                            " vs " + std::to_string(b.patch_count()) + " patches)");
}

Tensor local_mse(const Tensor& pr, const Tensor& pp, double eps) {
    return mean(square(normalize_local(pr, eps) - normalize_local(pp, eps)));
}

Tensor global_mse(const Tensor& pr, const Tensor& pp, const Tensor& sigma_r, const Tensor& sigma_p,
                  double eps) {
    return mean(square(normalize_global(pr, sigma_r, eps) - normalize_global(pp, sigma_p, eps)));
}

// One scale's w_local/w_global mix over already-selected patch rows.
Tensor scale_term(const Tensor& pr, const Tensor& pp, const Tensor& sigma_r, const Tensor& sigma_p,
                  const LossConfig& cfg) {
    Tensor l_local = local_mse(pr, pp, cfg.eps);
    Tensor l_global = global_mse(pr, pp, sigma_r, sigma_p, cfg.eps);
    if (cfg.pcc_mode == PccMode::folded && cfg.w_p > 0) {
        Tensor pc = mean_patch_pearson(pr, pp, cfg.eps);
        l_local = cfg.w_p * pc + cfg.w_l2 * l_local;
        l_global = cfg.w_p * pc + cfg.w_l2 * l_global;
    }
    Tensor term = cfg.w_local * l_local + cfg.w_global * l_global;
    if (cfg.pcc_mode == PccMode::separate) {
        Tensor pc = mean_patch_pearson(pr, pp, cfg.eps);
        term = term + (cfg.w_p * pc + cfg.w_l2 * l_local);
    }
    return term;
}

Tensor select_rows(const Tensor& patches, const std::vector<int>& rows, int P) {
    std::vector<std::int64_t> idx;
    idx.reserve(rows.size() * static_cast<size_t>(P));
    for (int k : rows)
        for (int p = 0; p < P; ++p) idx.push_back(static_cast<std::int64_t>(k) * P + p);
    return gather(patches, idx, {static_cast<int>(rows.size()), P});
}

}  // namespace

void LossConfig::validate() const {
    if (w_local < 0 || w_global < 0 || w_p < 0 || w_l2 < 0 || lambda_depth < 0 || lambda_ssim < 0)
        throw ConfigError("LossConfig: weights must be non-negative");
    if (lambda_ssim > 1) throw ConfigError("LossConfig: lambda_ssim must be <= 1");
    if (!(eps > 0)) throw ConfigError("LossConfig: eps must be positive");
    if (scales.empty()) throw ConfigError("LossConfig: scales must be non-empty");
    for (size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 1) throw ConfigError("LossConfig: scale " + std::to_string(scales[i]) + " must be >= 1");
        if (i > 0 && scales[i] <= scales[i - 1])
            throw ConfigError("LossConfig: scales must be strictly increasing");
    }
}

Tensor normalize_local(const Tensor& patches, double eps) {
    Tensor centered = patches - mean_last(patches);
    Tensor std_dev = sqrt(mean_last(square(centered)));
    return centered / (std_dev + eps);
}

Tensor loss_local(const PatchGrid& pr, const PatchGrid& pp, double eps) {
    check_same_grids(pr, pp, "loss_local");
    return local_mse(pr.patches, pp.patches, eps);
}

Tensor normalize_global(const Tensor& patches, const Tensor& sigma_global, double eps) {
    return (patches - mean_last(patches)) / (sigma_global + eps);
}

Tensor loss_global(const PatchGrid& pr, const PatchGrid& pp, const DepthMap& dr, const DepthMap& dp,
                   double eps) {
    check_same_grids(pr, pp, "loss_global");
    check_same_maps(dr, dp, "loss_global");
    return global_mse(pr.patches, pp.patches, map_std(dr), map_std(dp), eps);
}

Tensor map_std(const DepthMap& map) {
    Tensor centered = map.values - mean(map.values);
    return sqrt(mean(square(centered)));
}

Tensor depth_loss(const DepthMap& dr, const DepthMap& dp, const LossConfig& cfg) {
    cfg.validate();
    check_same_maps(dr, dp, "depth_loss");
    Tensor sigma_r = map_std(dr);
    Tensor sigma_p = map_std(dp);
    Tensor total = Tensor::scalar(0.0);
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s);
        PatchGrid pp = unfold(dp, s);
        total = total + scale_term(pr.patches, pp.patches, sigma_r, sigma_p, cfg);
    }
    return total / static_cast<double>(cfg.scales.size());
}

Tensor depth_loss_masked(const DepthMap& dr, const DepthMap& dp,
                         const std::vector<unsigned char>& valid, const LossConfig& cfg) {
    cfg.validate();
    check_same_maps(dr, dp, "depth_loss_masked");
    if (valid.size() != static_cast<size_t>(dr.height) * dr.width)
        throw ContractError("depth_loss_masked: mask size mismatch");
    Tensor sigma_r = map_std(dr);
    Tensor sigma_p = map_std(dp);
    Tensor total = Tensor::scalar(0.0);
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s);
        PatchGrid pp = unfold(dp, s);
        const int P = s * s;
        std::vector<int> kept;
        for (int prow = 0; prow < pr.rows; ++prow)
            for (int pcol = 0; pcol < pr.cols; ++pcol) {
                int count = 0;
                for (int wi = 0; wi < s; ++wi)
                    for (int wj = 0; wj < s; ++wj)
                        if (valid[static_cast<size_t>(prow * s + wi) * dr.width + pcol * s + wj]) ++count;
                if (2 * count >= P) kept.push_back(prow * pr.cols + pcol);
            }
        if (kept.empty()) continue;  // scale contributes zero
        Tensor pr_sel = select_rows(pr.patches, kept, P);
        Tensor pp_sel = select_rows(pp.patches, kept, P);
        total = total + scale_term(pr_sel, pp_sel, sigma_r, sigma_p, cfg);
    }
    return total / static_cast<double>(cfg.scales.size());
}

}  // namespace splatlab
