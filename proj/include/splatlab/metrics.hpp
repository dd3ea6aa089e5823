// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "splatlab/image.hpp"

namespace splatlab {

struct MetricReport {
    double psnr = 0;
    double ssim = 0;
    std::optional<double> depth_pearson;  // absent when variance degenerates
};

/// 10*log10(1/MSE) over all pixels and channels; identical images cap at 100.
double psnr(const ImageRGB& a, const ImageRGB& b);

/// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, C1=0.01^2, C2=0.03^2,
/// valid windows only (no padding), per channel then averaged. Requires both
/// extents >= 11.
double ssim(const ImageRGB& a, const ImageRGB& b);

/// Global Pearson r over masked pixels (nonzero mask = included). Undefined
/// (nullopt) when fewer than 2 pixels are masked or either side has zero
/// variance over them.
std::optional<double> depth_pearson(const DepthMap& a, const DepthMap& b,
                                    const std::vector<unsigned char>& mask);

/// Normalized size-tap Gaussian window (sums to 1); shared between the plain
/// SSIM here and the differentiable SSIM in the training objective.
std::vector<double> gaussian_window(int size, double sigma);

}  // namespace splatlab
