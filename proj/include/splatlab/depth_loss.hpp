// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "splatlab/image.hpp"
#include "splatlab/tensor.hpp"

namespace splatlab {

/// How the Pearson term combines with the normalized-MSE depth terms:
/// folded blends w_p*pearson + w_l2*mse inside each local/global term;
/// separate keeps the pure hierarchical loss and adds the cascade loss as its
/// own objective (composed by the caller).
enum class PccMode { folded, separate };

struct LossConfig {
    std::vector<int> scales{4, 8, 16};
    double w_local = 0.5;
    double w_global = 0.5;
    double w_p = 0.1;
    double w_l2 = 0.9;
    double eps = 1e-8;
    double lambda_depth = 0.05;
    double lambda_ssim = 0.2;
    PccMode pcc_mode = PccMode::folded;

    /// Throws ConfigError on negative weights, eps <= 0, lambda_ssim > 1, or
    /// scales not non-empty strictly increasing.
    void validate() const;
};

/// Per-patch z-score: (x - mean) / (std + eps), population std, row-wise on a
/// {K, P} patch tensor. Differentiable through mean and std.
Tensor normalize_local(const Tensor& patches, double eps);

/// Mean over patches of the per-element mean squared difference of locally
/// normalized patches. The per-element mean (not sum) keeps scales comparable
/// and makes the per-patch value equal 2*(1 - pearson) at eps = 0.
Tensor loss_local(const PatchGrid& pr, const PatchGrid& pp, double eps);

/// Center each patch by its own mean, scale by a map-wide population std
/// (passed as a scalar tensor so gradients reach it).
Tensor normalize_global(const Tensor& patches, const Tensor& sigma_global, double eps);

/// As loss_local but with global normalization; the stds come from the full
/// uncropped maps dr/dp.
Tensor loss_global(const PatchGrid& pr, const PatchGrid& pp, const DepthMap& dr,
                   const DepthMap& dp, double eps);

/// Population std over a whole map as a scalar tensor.
Tensor map_std(const DepthMap& map);

/// Multi-scale hierarchical loss: mean over cfg.scales of
/// w_local*L_local^s + w_global*L_global^s. In folded mode with w_p > 0 each
/// term becomes w_p * (mean patch pearson loss) + w_l2 * (the MSE term).
Tensor depth_loss(const DepthMap& dr, const DepthMap& dp, const LossConfig& cfg);

/// depth_loss restricted to valid pixels: patches with fewer than half their
/// pixels valid are dropped whole; kept patches use all their pixels. Global
/// stds still come from the full maps. A scale with no kept patches
/// contributes zero. `valid` is row-major H*W, nonzero = valid.
Tensor depth_loss_masked(const DepthMap& dr, const DepthMap& dp,
                         const std::vector<unsigned char>& valid, const LossConfig& cfg);

}  // namespace splatlab
