// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/image.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace splatlab {

namespace {

void check_extent(int height, int width, const char* what) {
    if (height <= 0 || width <= 0)
        throw ContractError(std::string(what) + ": extents " + std::to_string(height) + "x" +
                            std::to_string(width));
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

std::array<double, 3> normalized(const std::array<double, 3>& v, const char* what) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n < 1e-12) throw ContractError(std::string("look_at: degenerate ") + what);
    return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

DepthMap DepthMap::zeros(int height, int width) {
    check_extent(height, width, "DepthMap");
    return {height, width, Tensor::zeros({height, width})};
}

DepthMap DepthMap::from_values(int height, int width, std::vector<double> v, bool requires_grad) {
    check_extent(height, width, "DepthMap");
    return {height, width, Tensor::from({height, width}, std::move(v), requires_grad)};
}

DepthMap DepthMap::from_tensor(int height, int width, Tensor values) {
    check_extent(height, width, "DepthMap");
    if (values.shape() != std::vector<int>{height, width})
        throw ContractError("DepthMap::from_tensor: tensor shape mismatch");
    return {height, width, std::move(values)};
}

ImageRGB ImageRGB::zeros(int height, int width) {
    check_extent(height, width, "ImageRGB");
    return {height, width, Tensor::zeros({height, width, 3})};
}

ImageRGB ImageRGB::from_values(int height, int width, std::vector<double> v, bool requires_grad) {
    check_extent(height, width, "ImageRGB");
    return {height, width, Tensor::from({height, width, 3}, std::move(v), requires_grad)};
}

ImageRGB ImageRGB::from_tensor(int height, int width, Tensor values) {
    check_extent(height, width, "ImageRGB");
    if (values.shape() != std::vector<int>{height, width, 3})
        throw ContractError("ImageRGB::from_tensor: tensor shape mismatch");
    return {height, width, std::move(values)};
}

Camera Camera::make(int width, int height, double fx, double fy, double cx, double cy,
                    const std::array<double, 9>& R_wc, const std::array<double, 3>& t_wc) {
    check_extent(height, width, "Camera");
    if (!(fx > 0) || !(fy > 0))
        throw ContractError("Camera: focal lengths must be positive, got fx=" + std::to_string(fx) +
                            " fy=" + std::to_string(fy));
    const auto& r = R_wc;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0;
            for (int k = 0; k < 3; ++k) dot += r[i * 3 + k] * r[j * 3 + k];
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-10)
                throw ContractError("Camera: R_wc is not orthonormal");
        }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > 1e-10) throw ContractError("Camera: R_wc determinant is not +1");
    Camera c;
    c.width = width;
    c.height = height;
    c.fx = fx;
    c.fy = fy;
    c.cx = cx;
    c.cy = cy;
    c.R_wc = R_wc;
    c.t_wc = t_wc;
    return c;
}

Camera Camera::look_at(int width, int height, double focal, const std::array<double, 3>& eye,
                       const std::array<double, 3>& target, const std::array<double, 3>& up) {
    const auto z = normalized({target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]}, "view direction");
    const std::array<double, 3> down{-up[0], -up[1], -up[2]};
    const auto x = normalized(cross(down, z), "right axis (up parallel to view?)");
    const auto y = cross(z, x);
    const std::array<double, 9> R{x[0], x[1], x[2], y[0], y[1], y[2], z[0], z[1], z[2]};
    std::array<double, 3> t{};
    for (int i = 0; i < 3; ++i)
        t[i] = -(R[i * 3 + 0] * eye[0] + R[i * 3 + 1] * eye[1] + R[i * 3 + 2] * eye[2]);
    return make(width, height, focal, focal, (width - 1) * 0.5, (height - 1) * 0.5, R, t);
}

std::array<double, 3> Camera::to_camera(const std::array<double, 3>& p) const {
    std::array<double, 3> q{};
    for (int i = 0; i < 3; ++i)
        q[i] = R_wc[i * 3 + 0] * p[0] + R_wc[i * 3 + 1] * p[1] + R_wc[i * 3 + 2] * p[2] + t_wc[i];
    return q;
}

std::array<double, 3> Camera::center() const {
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i)
        c[i] = -(R_wc[0 * 3 + i] * t_wc[0] + R_wc[1 * 3 + i] * t_wc[1] + R_wc[2 * 3 + i] * t_wc[2]);
    return c;
}

PatchGrid unfold(const DepthMap& map, int scale) {
    if (scale < 1) throw ConfigError("unfold: scale " + std::to_string(scale) + " must be >= 1");
    if (scale > map.height || scale > map.width)
        throw ConfigError("unfold: scale " + std::to_string(scale) + " exceeds map extents " +
                          std::to_string(map.height) + "x" + std::to_string(map.width));
    const int rows = map.height / scale;
    const int cols = map.width / scale;
    const int P = scale * scale;
    std::vector<std::int64_t> idx;
    idx.reserve(static_cast<size_t>(rows) * cols * P);
    for (int pr = 0; pr < rows; ++pr)
        for (int pc = 0; pc < cols; ++pc)
            for (int wi = 0; wi < scale; ++wi)
                for (int wj = 0; wj < scale; ++wj)
                    idx.push_back(static_cast<std::int64_t>(pr * scale + wi) * map.width +
                                  (pc * scale + wj));
    PatchGrid grid;
    grid.scale = scale;
    grid.rows = rows;
    grid.cols = cols;
    grid.patches = gather(map.values, idx, {rows * cols, P});
    return grid;
}

DepthMap fold(const PatchGrid& grid, int height, int width) {
    const int s = grid.scale;
    if (s < 1 || grid.rows < 1 || grid.cols < 1) throw ContractError("fold: empty grid");
    if (grid.rows != height / s || grid.cols != width / s)
        throw ContractError("fold: grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                            " at scale " + std::to_string(s) + " inconsistent with " +
                            std::to_string(height) + "x" + std::to_string(width));
    const int ch = grid.rows * s;
    const int cw = grid.cols * s;
    const int P = s * s;
    std::vector<std::int64_t> idx;
    idx.reserve(static_cast<size_t>(ch) * cw);
    for (int i = 0; i < ch; ++i)
        for (int j = 0; j < cw; ++j) {
            const int k = (i / s) * grid.cols + (j / s);
            const int p = (i % s) * s + (j % s);
            idx.push_back(static_cast<std::int64_t>(k) * P + p);
        }
    return DepthMap::from_tensor(ch, cw, gather(grid.patches, idx, {ch, cw}));
}

void write_pfm(const std::string& path, const DepthMap& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_pfm: cannot open " + path);
    f << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    const auto& v = map.values.data();
    std::vector<float> row(static_cast<size_t>(map.width));
    for (int i = map.height - 1; i >= 0; --i) {
        for (int j = 0; j < map.width; ++j) row[j] = static_cast<float>(v[static_cast<size_t>(i) * map.width + j]);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f) throw IoError("write_pfm: short write to " + path);
}

DepthMap read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_pfm: cannot open " + path);
    std::string magic;
    int width = 0, height = 0;
    double scale = 0;
    f >> magic >> width >> height >> scale;
    if (magic != "Pf") throw IoError("read_pfm: " + path + " is not grayscale PFM (got '" + magic + "')");
    if (width <= 0 || height <= 0) throw IoError("read_pfm: bad extents in " + path);
    if (scale >= 0) throw IoError("read_pfm: big-endian PFM unsupported: " + path);
    f.get();  // single whitespace byte after the scale
    std::vector<double> values(static_cast<size_t>(width) * height);
    std::vector<float> row(static_cast<size_t>(width));
    for (int i = height - 1; i >= 0; --i) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!f) throw IoError("read_pfm: truncated data in " + path);
        for (int j = 0; j < width; ++j) values[static_cast<size_t>(i) * width + j] = row[j];
    }
    return DepthMap::from_values(height, width, std::move(values));
}

void write_ppm(const std::string& path, const ImageRGB& image) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_ppm: cannot open " + path);
    f << "P6\n" << image.width << " " << image.height << "\n255\n";
    const auto& v = image.values.data();
    std::vector<unsigned char> bytes(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        const double c = std::min(1.0, std::max(0.0, v[i]));
        bytes[i] = static_cast<unsigned char>(std::lround(c * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write_ppm: short write to " + path);
}

ImageRGB read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_ppm: cannot open " + path);
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    f >> magic >> width >> height >> maxval;
    if (magic != "P6") throw IoError("read_ppm: " + path + " is not binary PPM");
    if (width <= 0 || height <= 0 || maxval != 255) throw IoError("read_ppm: unsupported header in " + path);
    f.get();
    std::vector<unsigned char> bytes(static_cast<size_t>(width) * height * 3);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("read_ppm: truncated data in " + path);
    std::vector<double> values(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) values[i] = bytes[i] / 255.0;
    return ImageRGB::from_values(height, width, std::move(values));
}

}  // namespace splatlab
