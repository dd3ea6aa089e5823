// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/trainer.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "splatlab/common.hpp"
#include "splatlab/metrics.hpp"
#include "splatlab/pearson.hpp"

namespace splatlab {

namespace {

constexpr double kSsimC1 = 1e-4;
constexpr double kSsimC2 = 9e-4;

Tensor channel_plane(const Tensor& img, int H, int W, int c) {
    std::vector<std::int64_t> idx(static_cast<size_t>(H) * W);
    for (size_t p = 0; p < idx.size(); ++p) idx[p] = static_cast<std::int64_t>(p) * 3 + c;
    return gather(img, idx, {H, W});
}

Tensor blur2(const Tensor& x, const std::vector<double>& w) {
    return conv_cols_valid(conv_rows_valid(x, w), w);
}

/// Mean single-scale SSIM between two {H,W,3} tensors, differentiable in `a`.
Tensor ssim_mean(const Tensor& a, const Tensor& b, int H, int W) {
    static const std::vector<double> w = gaussian_window(11, 1.5);
    if (H < 11 || W < 11)
        throw ContractError("total_loss: image extent " + std::to_string(H) + "x" +
                            std::to_string(W) + " is below the 11x11 SSIM window");
    Tensor acc;
    for (int c = 0; c < 3; ++c) {
        Tensor x = channel_plane(a, H, W, c);
        Tensor y = channel_plane(b, H, W, c);
        Tensor mx = blur2(x, w), my = blur2(y, w);
        Tensor vx = blur2(x * x, w) - mx * mx;
        Tensor vy = blur2(y * y, w) - my * my;
        Tensor cxy = blur2(x * y, w) - mx * my;
        Tensor num = (2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2);
        Tensor den = (mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2);
        Tensor m = mean(num / den);
        acc = acc.defined() ? acc + m : m;
    }
    return acc / 3.0;
}

struct AdamGroup {
    Tensor param;
    double lr = 0;
    std::vector<double> m, v;
};

class Adam {
  public:
    Adam(std::vector<AdamGroup> groups, double beta1, double beta2, double eps)
        : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& g : groups_) {
            g.m.assign(g.param.numel(), 0.0);
            g.v.assign(g.param.numel(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& g : groups_) {
            const std::vector<double>& grad = g.param.grad();
            std::vector<double>& data = g.param.mutable_data();
            for (size_t i = 0; i < data.size(); ++i) {
                g.m[i] = beta1_ * g.m[i] + (1.0 - beta1_) * grad[i];
                g.v[i] = beta2_ * g.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
                double mhat = g.m[i] / bc1;
                double vhat = g.v[i] / bc2;
                data[i] -= g.lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

  private:
    std::vector<AdamGroup> groups_;
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

std::vector<unsigned char> alpha_mask(const Tensor& alpha_acc, double threshold) {
    const std::vector<double>& a = alpha_acc.data();
    std::vector<unsigned char> mask(a.size());
    for (size_t i = 0; i < a.size(); ++i) mask[i] = a[i] >= threshold ? 1 : 0;
    return mask;
}

ImageRGB clamped_copy(const ImageRGB& img) {
    std::vector<double> v = img.values.data();
    for (double& x : v) x = std::min(1.0, std::max(0.0, x));
    return ImageRGB::from_values(img.height, img.width, std::move(v));
}

struct HeldoutEval {
    double psnr = 0, ssim = 0, depth_pearson = 0;
};

HeldoutEval eval_heldout(const SyntheticScene& scene, const GaussianCloud& cloud,
                         const TrainConfig& cfg) {
    GaussianCloud frozen = cloud.detach();
    HeldoutEval ev;
    int dp_count = 0;
    for (int vid : scene.heldout_view_ids) {
        RenderOutput out = render(frozen, scene.cameras[vid], cfg.render);
        ImageRGB pred = clamped_copy(out.color);
        ev.psnr += psnr(pred, scene.gt_images[vid]);
        ev.ssim += ssim(pred, scene.gt_images[vid]);

        std::vector<unsigned char> mask = alpha_mask(out.alpha_acc, cfg.alpha_mask_threshold);
        const std::vector<unsigned char>& gt_mask = scene.gt_masks[vid];
        for (size_t p = 0; p < mask.size(); ++p) mask[p] = mask[p] && gt_mask[p];
        auto dp = depth_pearson(out.depth, scene.gt_depths[vid], mask);
        if (dp) {
            ev.depth_pearson += *dp;
            ++dp_count;
        }
    }
    const double n = static_cast<double>(scene.heldout_view_ids.size());
    ev.psnr /= n;
    ev.ssim /= n;
    ev.depth_pearson =
        dp_count ? ev.depth_pearson / dp_count : std::numeric_limits<double>::quiet_NaN();
    return ev;
}

}  // namespace

void TrainConfig::validate() const {
    if (iterations < 1)
        throw ConfigError("train iterations must be >= 1, got " + std::to_string(iterations));
    for (double lr : {lr_means, lr_rotations, lr_scales, lr_opacities, lr_colors})
        if (!(lr > 0.0))
            throw ConfigError("train learning rates must be > 0, got " + format_double(lr));
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("train moment decays must lie in [0, 1)");
    if (!(eps_opt > 0.0)) throw ConfigError("train eps_opt must be > 0");
    if (eval_every < 1)
        throw ConfigError("train eval_every must be >= 1, got " + std::to_string(eval_every));
    if (!(alpha_mask_threshold > 0.0 && alpha_mask_threshold <= 1.0))
        throw ConfigError("train alpha_mask_threshold must lie in (0, 1]");
    loss.validate();
}

LossBreakdown total_loss(const RenderOutput& render, const ImageRGB& gt_image,
                         const DepthMap& prior, const LossConfig& cfg, DepthMode mode,
                         double alpha_mask_threshold) {
    cfg.validate();
    const int H = gt_image.height, W = gt_image.width;
    if (render.color.height != H || render.color.width != W)
        throw ContractError("total_loss: render is " + std::to_string(render.color.height) + "x" +
                            std::to_string(render.color.width) + " but reference is " +
                            std::to_string(H) + "x" + std::to_string(W));
    if (mode != DepthMode::none && (prior.height != H || prior.width != W))
        throw ContractError("total_loss: prior is " + std::to_string(prior.height) + "x" +
                            std::to_string(prior.width) + " but reference is " +
                            std::to_string(H) + "x" + std::to_string(W));

    LossBreakdown lb;
    lb.l1 = mean(abs(render.color.values - gt_image.values));
    lb.dssim = (1.0 - ssim_mean(render.color.values, gt_image.values, H, W)) / 2.0;

    if (mode == DepthMode::none || cfg.lambda_depth == 0.0) {
        lb.depth = Tensor::scalar(0.0);
    } else {
        std::vector<unsigned char> mask = alpha_mask(render.alpha_acc, alpha_mask_threshold);
        if (mode == DepthMode::global_pearson)
            lb.depth = global_pearson_loss(render.depth, prior, mask, cfg.eps);
        else
            lb.depth = depth_loss_masked(render.depth, prior, mask, cfg);
    }
    lb.total = (1.0 - cfg.lambda_ssim) * lb.l1 + cfg.lambda_ssim * lb.dssim +
               cfg.lambda_depth * lb.depth;
    return lb;
}

TrainReport train(const SyntheticScene& scene, GaussianCloud& cloud, const TrainConfig& cfg,
                  const std::vector<DepthMap>& train_priors) {
    cfg.validate();
    if (scene.train_view_ids.empty() || scene.heldout_view_ids.empty())
        throw ContractError("train: need at least one train view and one held-out view");
    if (train_priors.size() != scene.train_view_ids.size())
        throw ContractError("train: got " + std::to_string(train_priors.size()) +
                            " priors for " + std::to_string(scene.train_view_ids.size()) +
                            " train views");
    for (const Tensor& p : cloud.parameters())
        if (!p.requires_grad())
            throw ContractError("train: cloud parameters must require gradients");

    const double extent = scene_extent(cloud);
    Adam opt({{cloud.means, cfg.lr_means * extent, {}, {}},
              {cloud.rotations, cfg.lr_rotations, {}, {}},
              {cloud.log_scales, cfg.lr_scales, {}, {}},
              {cloud.opacity_logits, cfg.lr_opacities, {}, {}},
              {cloud.colors, cfg.lr_colors, {}, {}}},
             cfg.beta1, cfg.beta2, cfg.eps_opt);

    TrainReport report;
    const int T = static_cast<int>(scene.train_view_ids.size());
    for (int it = 1; it <= cfg.iterations; ++it) {
        const int slot = (it - 1) % T;
        const int vid = scene.train_view_ids[slot];
        RenderOutput out = render(cloud, scene.cameras[vid], cfg.render);
        LossBreakdown lb = total_loss(out, scene.gt_images[vid], train_priors[slot], cfg.loss,
                                      cfg.depth_mode, cfg.alpha_mask_threshold);

        const struct {
            const char* name;
            double v;
        } comps[] = {{"l1", lb.l1.value()},
                     {"dssim", lb.dssim.value()},
                     {"depth", lb.depth.value()},
                     {"total", lb.total.value()}};
        for (const auto& c : comps)
            if (!std::isfinite(c.v))
                throw ContractError("train: component " + std::string(c.name) +
                                    " went non-finite at iteration " + std::to_string(it));

        for (Tensor p : cloud.parameters()) p.zero_grad();
        lb.total.backward();
        opt.step();
        cloud.renormalize_rotations();

        if (it % cfg.eval_every == 0 || it == cfg.iterations) {
            HeldoutEval ev = eval_heldout(scene, cloud, cfg);
            EvalRow row;
            row.iteration = it;
            row.total = lb.total.value();
            row.l1 = lb.l1.value();
            row.dssim = lb.dssim.value();
            row.depth = lb.depth.value();
            row.psnr = ev.psnr;
            row.ssim = ev.ssim;
            row.depth_pearson = ev.depth_pearson;
            report.rows.push_back(row);
        }
    }
    if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(cfg.checkpoint_path, cloud);
        report.checkpoint_path = cfg.checkpoint_path;
    }
    return report;
}

}  // namespace splatlab
