// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/pearson.hpp"

namespace splatlab {

Tensor mean_patch_pearson(const Tensor& pr, const Tensor& pp, double eps) {
    if (pr.shape() != pp.shape())
        throw ContractError("mean_patch_pearson: shape mismatch");
    Tensor cr = pr - mean_last(pr);
    Tensor cp = pp - mean_last(pp);
    Tensor num = sum_last(mul(cr, cp));
    Tensor den = mul(sqrt(sum_last(square(cr))), sqrt(sum_last(square(cp)))) + eps;
    return mean(1.0 - num / den);
}

Tensor pearson_loss(const PatchPair& pair, double eps) {
    if (!pair.x_r.defined() || !pair.x_p.defined())
        throw ContractError("pearson_loss: undefined inputs");
    if (pair.x_r.numel() != pair.x_p.numel())
        throw ContractError("pearson_loss: length mismatch");
    const int n = static_cast<int>(pair.x_r.numel());
    if (n < 2) throw ContractError("pearson_loss: need at least 2 elements, got " + std::to_string(n));
    return mean_patch_pearson(reshape(pair.x_r, {1, n}), reshape(pair.x_p, {1, n}), eps);
}

Tensor cascade_loss(const DepthMap& dr, const DepthMap& dp, const LossConfig& cfg) {
    cfg.validate();
    if (dr.height != dp.height || dr.width != dp.width)
        throw ContractError("cascade_loss: map sizes differ");
    Tensor total = Tensor::scalar(0.0);
    for (int s : cfg.scales) {
        PatchGrid pr = unfold(dr, s);
        PatchGrid pp = unfold(dp, s);
        Tensor pc = mean_patch_pearson(pr.patches, pp.patches, cfg.eps);
        Tensor l2 = loss_local(pr, pp, cfg.eps);
        total = total + (cfg.w_p * pc + cfg.w_l2 * l2);
    }
    return total / static_cast<double>(cfg.scales.size());
}

Tensor global_pearson_loss(const DepthMap& dr, const DepthMap& dp,
                           const std::vector<unsigned char>& valid, double eps) {
    if (dr.height != dp.height || dr.width != dp.width)
        throw ContractError("global_pearson_loss: map sizes differ");
    if (valid.size() != static_cast<size_t>(dr.height) * dr.width)
        throw ContractError("global_pearson_loss: mask size mismatch");
    std::vector<std::int64_t> idx;
    for (size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) idx.push_back(static_cast<std::int64_t>(i));
    if (idx.size() < 2) return Tensor::scalar(0.0);
    const int m = static_cast<int>(idx.size());
    Tensor xr = gather(dr.values, idx, {1, m});
    Tensor xp = gather(dp.values, idx, {1, m});
    return mean_patch_pearson(xr, xp, eps);
}

}  // namespace splatlab
