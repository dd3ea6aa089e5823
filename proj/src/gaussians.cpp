// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/gaussians.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace splatlab {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'L', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

Tensor transpose_3x3(const Tensor& m) {
    return gather(m, {0, 3, 6, 1, 4, 7, 2, 5, 8}, {3, 3});
}

// Row-major quaternion rotation matrix entries as scalar tensors.
std::vector<Tensor> rotation_entries(const Tensor& qn) {
    Tensor w = gather(qn, {0});
    Tensor x = gather(qn, {1});
    Tensor y = gather(qn, {2});
    Tensor z = gather(qn, {3});
    Tensor xx = square(x), yy = square(y), zz = square(z);
    Tensor wx = w * x, wy = w * y, wz = w * z;
    Tensor xy = x * y, xz = x * z, yz = y * z;
    return {1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz),       2.0 * (xz + wy),
            2.0 * (xy + wz),       1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx),
            2.0 * (xz - wy),       2.0 * (yz + wx),       1.0 - 2.0 * (xx + yy)};
}

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

GaussianCloud GaussianCloud::create(int count, int sh_degree, bool requires_grad) {
    if (count < 1) throw ContractError("GaussianCloud::create: count must be >= 1");
    if (sh_degree != 0 && sh_degree != 1)
        throw ContractError("GaussianCloud::create: sh_degree must be 0 or 1, got " + std::to_string(sh_degree));
    GaussianCloud c;
    c.sh_degree = sh_degree;
    c.means = Tensor::zeros({count, 3}, requires_grad);
    std::vector<double> quats(static_cast<size_t>(count) * 4, 0.0);
    for (int i = 0; i < count; ++i) quats[static_cast<size_t>(i) * 4] = 1.0;
    c.rotations = Tensor::from({count, 4}, std::move(quats), requires_grad);
    c.log_scales = Tensor::full({count, 3}, std::log(0.05), requires_grad);
    c.opacity_logits = Tensor::zeros({count}, requires_grad);
    c.colors = Tensor::zeros({count, c.color_dim()}, requires_grad);
    return c;
}

void GaussianCloud::renormalize_rotations() {
    auto& q = rotations.mutable_data();
    const int n = size();
    for (int i = 0; i < n; ++i) {
        double* row = q.data() + static_cast<size_t>(i) * 4;
        const double norm = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2] + row[3] * row[3]);
        if (norm < 1e-12) {
            row[0] = 1.0;
            row[1] = row[2] = row[3] = 0.0;
            continue;
        }
        for (int k = 0; k < 4; ++k) row[k] /= norm;
    }
}

GaussianCloud GaussianCloud::detach() const {
    GaussianCloud c;
    c.sh_degree = sh_degree;
    c.means = Tensor::from(means.shape(), means.data());
    c.rotations = Tensor::from(rotations.shape(), rotations.data());
    c.log_scales = Tensor::from(log_scales.shape(), log_scales.data());
    c.opacity_logits = Tensor::from(opacity_logits.shape(), opacity_logits.data());
    c.colors = Tensor::from(colors.shape(), colors.data());
    return c;
}

std::vector<Tensor> GaussianCloud::parameters() const {
    return {means, rotations, log_scales, opacity_logits, colors};
}

Tensor covariance(const Tensor& q, const Tensor& log_scales) {
    if (q.numel() != 4) throw ContractError("covariance: quaternion must have 4 elements");
    if (log_scales.numel() != 3) throw ContractError("covariance: log_scales must have 3 elements");
    Tensor qn = reshape(q, {4}) / sqrt(sum(square(q)));
    auto r = rotation_entries(qn);
    Tensor R = reshape(stack_scalars(r), {3, 3});
    Tensor Rt = reshape(stack_scalars({r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]}), {3, 3});
    Tensor s2 = exp(mul(reshape(log_scales, {3}), 2.0));
    Tensor zero = Tensor::scalar(0.0);
    Tensor e0 = gather(s2, {0}), e1 = gather(s2, {1}), e2 = gather(s2, {2});
    Tensor S2 = reshape(stack_scalars({e0, zero, zero, zero, e1, zero, zero, zero, e2}), {3, 3});
    Tensor sigma = matmul(matmul(R, S2), Rt);
    return mul(sigma + transpose_3x3(sigma), 0.5);
}

std::optional<Projected2D> project(const GaussianCloud& cloud, int index, const Camera& cam) {
    if (index < 0 || index >= cloud.size())
        throw ContractError("project: index " + std::to_string(index) + " out of range");

    const std::int64_t base = static_cast<std::int64_t>(index) * 3;
    Tensor mu = gather(cloud.means, {base, base + 1, base + 2}, {3, 1});
    Tensor Rc = Tensor::from({3, 3}, {cam.R_wc.begin(), cam.R_wc.end()});
    Tensor tc = Tensor::from({3, 1}, {cam.t_wc.begin(), cam.t_wc.end()});
    Tensor p_cam = matmul(Rc, mu) + tc;  // {3, 1}
    Tensor x = gather(p_cam, {0});
    Tensor y = gather(p_cam, {1});
    Tensor z = gather(p_cam, {2});
    if (z.value() <= kZNear) return std::nullopt;

    Tensor mu_img = stack_scalars({cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy});

    const std::int64_t qbase = static_cast<std::int64_t>(index) * 4;
    Tensor q = gather(cloud.rotations, {qbase, qbase + 1, qbase + 2, qbase + 3});
    Tensor ls = gather(cloud.log_scales, {base, base + 1, base + 2});
    Tensor sigma3 = covariance(q, ls);

    Tensor z2 = square(z);
    Tensor zero = Tensor::scalar(0.0);
    Tensor J = reshape(stack_scalars({cam.fx / z, zero, neg(cam.fx * x / z2),
                                      zero, cam.fy / z, neg(cam.fy * y / z2)}),
                       {2, 3});
    Tensor JW = matmul(J, Rc);                                      // {2, 3}
    Tensor JWt = reshape(gather(JW, {0, 3, 1, 4, 2, 5}), {3, 2});   // transpose
    Tensor sigma2 = matmul(matmul(JW, sigma3), JWt);
    sigma2 = sigma2 + Tensor::from({2, 2}, {kLowpassFloor, 0.0, 0.0, kLowpassFloor});

    Projected2D out;
    out.mu = mu_img;
    out.sigma = sigma2;
    out.z = z;
    out.alpha = sigmoid(gather(cloud.opacity_logits, {index}));
    return out;
}

double scene_extent(const GaussianCloud& cloud) {
    const auto& m = cloud.means.data();
    const int n = cloud.size();
    double cx = 0, cy = 0, cz = 0;
    for (int i = 0; i < n; ++i) {
        cx += m[static_cast<size_t>(i) * 3];
        cy += m[static_cast<size_t>(i) * 3 + 1];
        cz += m[static_cast<size_t>(i) * 3 + 2];
    }
    cx /= n;
    cy /= n;
    cz /= n;
    double best = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = m[static_cast<size_t>(i) * 3] - cx;
        const double dy = m[static_cast<size_t>(i) * 3 + 1] - cy;
        const double dz = m[static_cast<size_t>(i) * 3 + 2] - cz;
        best = std::max(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return best;
}

void save_checkpoint(const std::string& path, const GaussianCloud& cloud) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_checkpoint: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    write_raw(f, kVersion);
    const std::uint64_t count = static_cast<std::uint64_t>(cloud.size());
    write_raw(f, count);
    write_raw(f, static_cast<std::uint32_t>(cloud.sh_degree));
    const auto& mean = cloud.means.data();
    const auto& rot = cloud.rotations.data();
    const auto& ls = cloud.log_scales.data();
    const auto& op = cloud.opacity_logits.data();
    const auto& col = cloud.colors.data();
    const int cd = cloud.color_dim();
    for (std::uint64_t i = 0; i < count; ++i) {
        f.write(reinterpret_cast<const char*>(mean.data() + i * 3), 3 * sizeof(double));
        f.write(reinterpret_cast<const char*>(rot.data() + i * 4), 4 * sizeof(double));
        f.write(reinterpret_cast<const char*>(ls.data() + i * 3), 3 * sizeof(double));
        f.write(reinterpret_cast<const char*>(op.data() + i), sizeof(double));
        f.write(reinterpret_cast<const char*>(col.data() + i * cd), cd * sizeof(double));
    }
    if (!f) throw IoError("save_checkpoint: short write to " + path);
}

GaussianCloud load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("load_checkpoint: " + path + " is not a cloud checkpoint");
    std::uint32_t version = 0;
    read_raw(f, version);
    if (version != kVersion)
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version) + " in " + path);
    std::uint64_t count = 0;
    std::uint32_t degree = 0;
    read_raw(f, count);
    read_raw(f, degree);
    if (!f || count == 0 || degree > 1) throw IoError("load_checkpoint: bad header in " + path);

    const int n = static_cast<int>(count);
    const int cd = degree == 0 ? 3 : 12;
    std::vector<double> mean(static_cast<size_t>(n) * 3), rot(static_cast<size_t>(n) * 4),
        ls(static_cast<size_t>(n) * 3), op(static_cast<size_t>(n)), col(static_cast<size_t>(n) * cd);
    for (int i = 0; i < n; ++i) {
        f.read(reinterpret_cast<char*>(mean.data() + static_cast<size_t>(i) * 3), 3 * sizeof(double));
        f.read(reinterpret_cast<char*>(rot.data() + static_cast<size_t>(i) * 4), 4 * sizeof(double));
        f.read(reinterpret_cast<char*>(ls.data() + static_cast<size_t>(i) * 3), 3 * sizeof(double));
        f.read(reinterpret_cast<char*>(op.data() + static_cast<size_t>(i)), sizeof(double));
        f.read(reinterpret_cast<char*>(col.data() + static_cast<size_t>(i) * cd), cd * sizeof(double));
    }
    if (!f) throw IoError("load_checkpoint: truncated data in " + path);

    GaussianCloud c;
    c.sh_degree = static_cast<int>(degree);
    c.means = Tensor::from({n, 3}, std::move(mean), true);
    c.rotations = Tensor::from({n, 4}, std::move(rot), true);
    c.log_scales = Tensor::from({n, 3}, std::move(ls), true);
    c.opacity_logits = Tensor::from({n}, std::move(op), true);
    c.colors = Tensor::from({n, cd}, std::move(col), true);
    return c;
}

}  // namespace splatlab
