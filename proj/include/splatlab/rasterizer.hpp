// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "splatlab/gaussians.hpp"
#include "splatlab/image.hpp"

namespace splatlab {

inline constexpr double kResponseClip = 1.0 / 255.0;  // per-pixel response below this is skipped
inline constexpr double kTransmittanceFloor = 1e-4;   // compositing stops before crossing this
inline constexpr double kCompositeCap = 0.9999;       // per-sample alpha*G ceiling
inline constexpr int kTileSize = 16;                  // candidate-culling tile edge, pixels

struct RenderConfig {
    std::array<double, 3> background{0.0, 0.0, 0.0};
    bool normalize_depth = true;  // divide accumulated depth by accumulated alpha
    double eps_d = 1e-6;          // depth normalization guard
};

struct RenderOutput {
    ImageRGB color;
    DepthMap depth;
    Tensor alpha_acc;  // {H, W}, per-pixel sum of composite weights
};

/// Front-to-back alpha compositing of the cloud through `cam`. Gaussians are
/// globally sorted by camera-space depth (index tie-break); per pixel, each
/// candidate contributes w = alpha*G*transmittance until the transmittance
/// would cross kTransmittanceFloor. Responses below kResponseClip are skipped
/// with zero gradient. All outputs are differentiable w.r.t. cloud parameters;
/// results are bit-identical across runs and thread counts.
RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg = {});

}  // namespace splatlab
