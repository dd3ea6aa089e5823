// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "splatlab/depth_loss.hpp"
#include "splatlab/image.hpp"
#include "splatlab/tensor.hpp"

namespace splatlab {

/// Rendered/prior depth vectors of equal length (one patch each).
struct PatchPair {
    Tensor x_r;
    Tensor x_p;
};

/// 1 - sum((xr-mean)(xp-mean)) / (sqrt(ss_r)*sqrt(ss_p) + eps), in [0, 2].
/// eps guards constant patches in the denominator product; a constant side
/// yields a neutral value near 1. Throws ContractError for N < 2.
Tensor pearson_loss(const PatchPair& pair, double eps);

/// Row-wise pearson loss on {K, P} patch tensors, averaged over the K rows.
Tensor mean_patch_pearson(const Tensor& pr, const Tensor& pp, double eps);

/// Mean over cfg.scales of w_p * (mean patch pearson loss) +
/// w_l2 * (locally normalized MSE), patches from unfold at each scale.
Tensor cascade_loss(const DepthMap& dr, const DepthMap& dp, const LossConfig& cfg);

/// Single image-level pearson loss over the valid pixels of two maps (the
/// patch-free baseline). Fewer than 2 valid pixels yields zero.
Tensor global_pearson_loss(const DepthMap& dr, const DepthMap& dp,
                           const std::vector<unsigned char>& valid, double eps);

}  // namespace splatlab
