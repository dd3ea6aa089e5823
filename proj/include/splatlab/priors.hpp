// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatlab/gaussians.hpp"
#include "splatlab/image.hpp"
#include "splatlab/rasterizer.hpp"

namespace splatlab {

/// Named synthetic scene families. Every recipe places its content inside a
/// camera arc and backs it with a tilted wall so depth is defined (and varied)
/// on nearly every pixel.
struct SceneRecipe {
    std::string recipe = "layered-planes";  // layered-planes | random-blobs | textured-box
    int width = 64;
    int height = 64;
    int gaussians = 500;  // total budget, wall included
    int layers = 3;       // layered-planes only
    int views = 5;
    int train_views = 3;
    int sh_degree = 0;

    void validate() const;
};

struct SyntheticScene {
    GaussianCloud ground_truth;  // generator-owned, no gradients
    std::vector<Camera> cameras;
    std::vector<int> train_view_ids;    // strict subset of cameras
    std::vector<int> heldout_view_ids;  // non-empty complement
    std::vector<ImageRGB> gt_images;    // per camera, rendered by render()
    std::vector<DepthMap> gt_depths;    // per camera, alpha-normalized depth
    std::vector<std::vector<unsigned char>> gt_masks;  // per camera, alpha_acc >= 0.5
};

/// Uncalibrated depth-prior corruption: gain, offset, additive noise, and a
/// box-blur of the given radius (window clipped at borders).
struct PriorModel {
    double gain = 1.0;    // a > 0
    double offset = 0.0;  // b
    double noise_std = 0.0;
    int radius = 0;

    void validate() const;
};

/// Deterministic per (recipe, seed). Ground-truth renders come from the same
/// rasterizer the trainer uses. Guarantees alpha coverage >= 90% of pixels and
/// nonzero depth std on every view.
SyntheticScene make_scene(const SceneRecipe& recipe, std::uint64_t seed);

/// D_p = gain * blur(D_true) + offset + N(0, noise_std^2), per pixel,
/// deterministic per seed. The result carries no gradients.
DepthMap simulate_prior(const DepthMap& d_true, const PriorModel& model, std::uint64_t seed);

/// Training initialization from ground truth: jitters means by N(0, sigma_p^2),
/// drops `drop_fraction` of the points (keeps N - floor(f*N)), then resets
/// appearance to defaults: isotropic scales from the nearest-neighbor distance,
/// opacity ~0.9, and (unless keep_colors) mid-gray color.
GaussianCloud dense_init(const SyntheticScene& scene, double sigma_p, double drop_fraction,
                         std::uint64_t seed, bool keep_colors = false);

/// As dense_init but keeps only points whose centers project into at least two
/// training views; pass a larger sigma_p to emulate a weak initialization.
GaussianCloud sparse_init(const SyntheticScene& scene, double sigma_p, double drop_fraction,
                          std::uint64_t seed);

}  // namespace splatlab
