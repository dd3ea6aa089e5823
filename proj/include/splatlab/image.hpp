// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "splatlab/tensor.hpp"

namespace splatlab {

/// Single-channel depth raster. Values live in a tensor so rendered depth can
/// stay differentiable; stored depths are raw, normalization happens loss-side.
struct DepthMap {
    int height = 0;
    int width = 0;
    Tensor values;  // {H, W}

    static DepthMap zeros(int height, int width);
    static DepthMap from_values(int height, int width, std::vector<double> v,
                                bool requires_grad = false);
    static DepthMap from_tensor(int height, int width, Tensor values);

    double at(int i, int j) const { return values.data()[static_cast<size_t>(i) * width + j]; }
};

/// Interleaved RGB raster, values nominally in [0,1]. Clamping happens only at
/// serialization; in-graph values may exceed the range.
struct ImageRGB {
    int height = 0;
    int width = 0;
    Tensor values;  // {H, W, 3}

    static ImageRGB zeros(int height, int width);
    static ImageRGB from_values(int height, int width, std::vector<double> v,
                                bool requires_grad = false);
    static ImageRGB from_tensor(int height, int width, Tensor values);

    double at(int i, int j, int c) const {
        return values.data()[(static_cast<size_t>(i) * width + j) * 3 + c];
    }
};

/// Pinhole camera: intrinsics in pixels plus a world-to-camera rigid pose.
/// Pixel (row i, col j) is sampled at continuous coordinates (x=j, y=i);
/// the image y axis points down.
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::array<double, 9> R_wc{};  // row-major
    std::array<double, 3> t_wc{};

    /// Validates fx, fy > 0 and R_wc orthonormal with det +1 to 1e-10.
    static Camera make(int width, int height, double fx, double fy, double cx, double cy,
                       const std::array<double, 9>& R_wc, const std::array<double, 3>& t_wc);

    /// Camera at `eye` looking toward `target`, principal point centered at
    /// ((W-1)/2, (H-1)/2), fx = fy = focal.
    static Camera look_at(int width, int height, double focal, const std::array<double, 3>& eye,
                          const std::array<double, 3>& target, const std::array<double, 3>& up);

    std::array<double, 3> to_camera(const std::array<double, 3>& p_world) const;
    std::array<double, 3> center() const;  // -R_wc^T t_wc
};

/// Non-overlapping s x s patches covering the top-left floor(H/s)s x
/// floor(W/s)s crop of a map, trailing remainder pixels dropped.
struct PatchGrid {
    int scale = 0;
    int rows = 0;
    int cols = 0;
    Tensor patches;  // {K, s*s}, K = rows*cols, patches row-major over the grid

    int patch_count() const { return rows * cols; }
};

/// Pure re-indexing, differentiable. Patch k holds its s x s block's pixels in
/// row-major order. Scale 1 yields H*W singleton patches.
PatchGrid unfold(const DepthMap& map, int scale);

/// Inverse of unfold on the covered crop; returns the rows*s x cols*s map.
/// height/width are the pre-crop extents and must be consistent with the grid.
DepthMap fold(const PatchGrid& grid, int height, int width);

// Little-endian grayscale PFM (scale -1.0, bottom-to-top rows).
void write_pfm(const std::string& path, const DepthMap& map);
DepthMap read_pfm(const std::string& path);

// Binary 8-bit PPM (P6). Values clamped to [0,1] and quantized on write.
void write_ppm(const std::string& path, const ImageRGB& image);
ImageRGB read_ppm(const std::string& path);

}  // namespace splatlab
