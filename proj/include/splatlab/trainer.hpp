// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatlab/depth_loss.hpp"
#include "splatlab/gaussians.hpp"
#include "splatlab/priors.hpp"
#include "splatlab/rasterizer.hpp"

namespace splatlab {

/// Which depth supervision the objective carries. `global_pearson` is the
/// patch-free image-level baseline; `hierarchical` is the multi-scale loss
/// configured by LossConfig (folded or separate correlation term).
enum class DepthMode { none, global_pearson, hierarchical };

struct TrainConfig {
    int iterations = 2000;
    double lr_means = 1.6e-4;  // scaled by scene extent inside train()
    double lr_rotations = 1e-3;
    double lr_scales = 5e-3;
    double lr_opacities = 5e-2;
    double lr_colors = 2.5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;
    int eval_every = 200;
    std::uint64_t seed = 0;  // recorded in artifacts; the loop itself is rng-free
    LossConfig loss;
    DepthMode depth_mode = DepthMode::hierarchical;
    RenderConfig render;
    double alpha_mask_threshold = 0.5;  // pixel validity cut for depth supervision
    std::string checkpoint_path;        // empty: skip writing the final checkpoint

    void validate() const;
};

/// Scalar objective plus its unweighted components; total is the graph root.
/// total = (1 - lambda_ssim) * l1 + lambda_ssim * dssim + lambda_depth * depth.
struct LossBreakdown {
    Tensor total;
    Tensor l1;     // mean absolute color error
    Tensor dssim;  // (1 - mean SSIM) / 2
    Tensor depth;  // masked depth term for the active mode, 0 when disabled
};

/// Differentiable objective between a rendered view and its references.
/// Depth supervision only sees pixels whose alpha_acc clears the threshold;
/// patches with fewer than half their pixels valid are dropped whole.
LossBreakdown total_loss(const RenderOutput& render, const ImageRGB& gt_image,
                         const DepthMap& prior, const LossConfig& cfg,
                         DepthMode mode = DepthMode::hierarchical,
                         double alpha_mask_threshold = 0.5);

struct EvalRow {
    int iteration = 0;
    double total = 0, l1 = 0, dssim = 0, depth = 0;  // train loss at this step
    double psnr = 0, ssim = 0;                       // held-out means
    double depth_pearson = 0;  // held-out mean over views where defined; NaN if none
};

struct TrainReport {
    std::vector<EvalRow> rows;  // strictly increasing iteration indices
    std::string checkpoint_path;
};

/// Adaptive-moment descent over one cloud, one train view per iteration in
/// round-robin order. Quaternions are renormalized after every step. Aborts
/// with the iteration index and component name if the loss goes non-finite.
/// Deterministic: same scene, init, config, and priors give a bit-identical
/// report. `train_priors` is index-aligned with scene.train_view_ids.
TrainReport train(const SyntheticScene& scene, GaussianCloud& cloud, const TrainConfig& cfg,
                  const std::vector<DepthMap>& train_priors);

}  // namespace splatlab
