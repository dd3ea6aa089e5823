// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "splatlab/image.hpp"
#include "splatlab/tensor.hpp"

namespace splatlab {

inline constexpr double kZNear = 0.01;        // hard cull plane, meters
inline constexpr double kLowpassFloor = 0.3;  // px^2 added to projected covariance diagonal
inline constexpr double kSH0 = 0.28209479177387814;  // degree-0 basis constant
inline constexpr double kSH1 = 0.4886025119029199;   // degree-1 basis constant

/// Anisotropic 3-D Gaussians with exp/sigmoid reparameterized scales and
/// opacity. Colors are spherical-harmonics coefficients, degree 0 (3 values)
/// or degree 1 (12 values, coefficient-major: f0 rgb, f1 rgb, f2 rgb, f3 rgb).
struct GaussianCloud {
    int sh_degree = 0;      // 0 or 1
    Tensor means;           // {N, 3}, meters
    Tensor rotations;       // {N, 4}, quaternion (w, x, y, z)
    Tensor log_scales;      // {N, 3}, s_i = exp(log_scale_i)
    Tensor opacity_logits;  // {N}, alpha = sigmoid(logit)
    Tensor colors;          // {N, 3} or {N, 12}

    int size() const { return means.defined() ? means.shape()[0] : 0; }
    int color_dim() const { return sh_degree == 0 ? 3 : 12; }

    /// Neutral cloud: zero means, identity rotations, scale 0.05 m, opacity
    /// 0.5, mid-gray color.
    static GaussianCloud create(int count, int sh_degree, bool requires_grad);

    /// Scales each quaternion row to unit length in place (data only, no tape).
    void renormalize_rotations();

    /// Deep copy with requires_grad off; renders from it build no graph.
    GaussianCloud detach() const;

    std::vector<Tensor> parameters() const;
};

/// Projected footprint of one Gaussian; every field is a graph tensor.
struct Projected2D {
    Tensor mu;     // {2}, pixels
    Tensor sigma;  // {2, 2}, px^2, symmetric positive definite after flooring
    Tensor z;      // scalar, camera-space meters
    Tensor alpha;  // scalar in (0, 1)
};

/// R S^2 R^T from a (not necessarily unit) quaternion and log-scales;
/// output is exactly symmetric. q {4}, log_scales {3} -> {3, 3}.
Tensor covariance(const Tensor& q, const Tensor& log_scales);

/// Perspective projection of one Gaussian through the local affine
/// approximation; the projected covariance gets kLowpassFloor added to its
/// diagonal. Returns nullopt when the camera-space depth is at or behind
/// kZNear (culled, no gradient).
std::optional<Projected2D> project(const GaussianCloud& cloud, int index, const Camera& cam);

/// Largest distance from the centroid of the means to any mean; the
/// translation learning rate is scaled by this.
double scene_extent(const GaussianCloud& cloud);

// Versioned binary checkpoint; byte-exact round-trip.
void save_checkpoint(const std::string& path, const GaussianCloud& cloud);
GaussianCloud load_checkpoint(const std::string& path);

}  // namespace splatlab
