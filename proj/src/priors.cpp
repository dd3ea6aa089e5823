// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "splatlab/common.hpp"

namespace splatlab {

namespace {

constexpr double kCoverageFloor = 0.9;

double clamp01ish(double v) { return std::min(0.97, std::max(0.03, v)); }

/// Isotropic footprint from a squared nearest-neighbor distance; the scene
/// generator and the reinitializers share this rule so a zero-jitter reinit
/// reproduces generated scales exactly.
double footprint(double nn_d2) {
    return std::min(0.35, std::max(0.02, 0.7 * std::sqrt(nn_d2)));
}

double nearest_d2(const std::vector<double>& means, int count, int self,
                  const double* p) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < count; ++r) {
        if (r == self) continue;
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
            double d = means[3 * r + c] - p[c];
            d2 += d * d;
        }
        best = std::min(best, d2);
    }
    return best;
}

/// Row-wise accumulator for ground-truth clouds; colors are given as display
/// RGB and stored as degree-0 coefficients. Scales resolve at build() from the
/// nearest neighbor over the finished cloud.
struct Builder {
    int sh_degree = 0;
    std::vector<double> means, quats, logits, colors;
    int count = 0;

    void add(const std::array<double, 3>& mean, const std::array<double, 4>& quat,
             double opacity_logit, const std::array<double, 3>& rgb) {
        for (double m : mean) means.push_back(m);
        for (double q : quat) quats.push_back(q);
        logits.push_back(opacity_logit);
        colors.push_back((clamp01ish(rgb[0]) - 0.5) / kSH0);
        colors.push_back((clamp01ish(rgb[1]) - 0.5) / kSH0);
        colors.push_back((clamp01ish(rgb[2]) - 0.5) / kSH0);
        if (sh_degree == 1) colors.insert(colors.end(), 9, 0.0);
        ++count;
    }

    GaussianCloud build() {
        std::vector<double> log_scales(static_cast<size_t>(count) * 3);
        for (int r = 0; r < count; ++r) {
            double s = count > 1 ? footprint(nearest_d2(means, count, r, &means[3 * r])) : 0.05;
            for (int c = 0; c < 3; ++c) log_scales[3 * r + c] = std::log(s);
        }
        GaussianCloud cloud;
        cloud.sh_degree = sh_degree;
        cloud.means = Tensor::from({count, 3}, means, false);
        cloud.rotations = Tensor::from({count, 4}, quats, false);
        cloud.log_scales = Tensor::from({count, 3}, log_scales, false);
        cloud.opacity_logits = Tensor::from({count}, logits, false);
        cloud.colors = Tensor::from({count, sh_degree == 0 ? 3 : 12}, colors, false);
        return cloud;
    }
};

constexpr std::array<double, 4> kIdentityQuat = {1.0, 0.0, 0.0, 0.0};

/// Backdrop: a tilted textured plane behind the content, large enough to fill
/// every camera frustum. Returns the number of rows consumed.
int add_wall(Builder& b, Rng& rng, int budget) {
    int m = std::max(2, static_cast<int>(std::floor(std::sqrt(static_cast<double>(budget)))));
    while (m * m > budget) --m;
    const double half = 2.6;
    const double spacing = 2.0 * half / (m - 1);
    for (int gi = 0; gi < m; ++gi) {
        for (int gj = 0; gj < m; ++gj) {
            double x0 = -half + spacing * gi;
            double y0 = -half + spacing * gj;
            double x = x0 + 0.05 * spacing * rng.normal();
            double y = y0 + 0.05 * spacing * rng.normal();
            double z = 1.0 + 0.3 * (x0 / half) + 0.12 * (y0 / half) + 0.01 * rng.normal();
            std::array<double, 3> rgb = {
                0.45 + 0.3 * std::sin(1.9 * x0 + 0.4) * std::cos(1.3 * y0 + 0.2),
                0.45 + 0.3 * std::sin(1.5 * x0 + 2.1) * std::cos(1.7 * y0 + 1.1),
                0.45 + 0.3 * std::sin(2.3 * x0 + 4.0) * std::cos(1.1 * y0 + 2.6)};
            for (double& c : rgb) c += 0.03 * rng.normal();
            b.add({x, y, z}, kIdentityQuat, 2.2, rgb);
        }
    }
    return m * m;
}

void add_blob(Builder& b, Rng& rng) {
    std::array<double, 3> mean = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9),
                                  rng.uniform(-0.6, 0.6)};
    std::array<double, 4> q;
    double n2 = 0.0;
    for (double& qi : q) {
        qi = rng.normal();
        n2 += qi * qi;
    }
    if (n2 < 1e-12) q = kIdentityQuat;
    else
        for (double& qi : q) qi /= std::sqrt(n2);
    std::array<double, 3> rgb = {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
                                 rng.uniform(0.15, 0.85)};
    b.add(mean, q, 2.2, rgb);
}

void add_layered_planes(Builder& b, Rng& rng, int layers, int budget) {
    int per = budget / layers;
    for (int l = 0; l < layers; ++l) {
        double zl = layers == 1 ? 0.0 : -0.55 + 1.1 * l / (layers - 1);
        double cx = 0.55 * std::cos(2.4 * l + 0.8);
        double cy = 0.4 * std::sin(2.4 * l + 0.8);
        int g = std::max(2, static_cast<int>(std::floor(std::sqrt(static_cast<double>(per)))));
        while (g * g > per) --g;
        const double side = 0.9;
        const double spacing = side / (g - 1);
        std::array<double, 3> base = {0.5 + 0.32 * std::sin(2.1 * l + 0.3),
                                      0.5 + 0.32 * std::sin(1.7 * l + 2.4),
                                      0.5 + 0.32 * std::sin(2.6 * l + 4.5)};
        for (int gi = 0; gi < g; ++gi) {
            for (int gj = 0; gj < g; ++gj) {
                double x = cx - side / 2 + spacing * gi + 0.05 * spacing * rng.normal();
                double y = cy - side / 2 + spacing * gj + 0.05 * spacing * rng.normal();
                double z = zl + 0.01 * rng.normal();
                double shade = ((gi + gj) & 1) ? -0.12 : 0.12;
                std::array<double, 3> rgb = {base[0] + shade + 0.02 * rng.normal(),
                                             base[1] + shade + 0.02 * rng.normal(),
                                             base[2] + shade + 0.02 * rng.normal()};
                b.add({x, y, z}, kIdentityQuat, 2.2, rgb);
            }
        }
    }
}

void add_textured_box(Builder& b, Rng& rng, int budget) {
    const std::array<double, 3> h = {0.55, 0.45, 0.4};
    const std::array<std::array<double, 3>, 6> face_base = {{{0.78, 0.35, 0.3},
                                                             {0.3, 0.72, 0.35},
                                                             {0.32, 0.4, 0.8},
                                                             {0.78, 0.7, 0.3},
                                                             {0.7, 0.35, 0.72},
                                                             {0.32, 0.72, 0.7}}};
    int per = budget / 6;
    int face = 0;
    for (int axis = 0; axis < 3; ++axis) {
        for (int sign = -1; sign <= 1; sign += 2, ++face) {
            int u = (axis + 1) % 3;
            int v = (axis + 2) % 3;
            int g = std::max(2, static_cast<int>(std::floor(std::sqrt(static_cast<double>(per)))));
            while (g * g > per) --g;
            double su = 2.0 * h[u] / (g - 1);
            double sv = 2.0 * h[v] / (g - 1);
            for (int gi = 0; gi < g; ++gi) {
                for (int gj = 0; gj < g; ++gj) {
                    std::array<double, 3> mean{};
                    mean[axis] = sign * h[axis];
                    mean[u] = -h[u] + su * gi + 0.05 * su * rng.normal();
                    mean[v] = -h[v] + sv * gj + 0.05 * sv * rng.normal();
                    double shade = ((gi + gj) & 1) ? -0.15 : 0.15;
                    const auto& base = face_base[face];
                    std::array<double, 3> rgb = {base[0] + shade + 0.02 * rng.normal(),
                                                 base[1] + shade + 0.02 * rng.normal(),
                                                 base[2] + shade + 0.02 * rng.normal()};
                    b.add(mean, kIdentityQuat, 2.2, rgb);
                }
            }
        }
    }
}

std::vector<Camera> make_cameras(const SceneRecipe& r) {
    std::vector<Camera> cams;
    cams.reserve(r.views);
    const double dist = 3.2;
    const double focal = 1.2 * r.width;
    for (int k = 0; k < r.views; ++k) {
        double t = r.views == 1 ? 0.0 : 2.0 * k / (r.views - 1) - 1.0;
        double th = 0.45 * t;
        std::array<double, 3> eye = {dist * std::sin(th), 0.25 * t, -dist * std::cos(th)};
        cams.push_back(
            Camera::look_at(r.width, r.height, focal, eye, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    }
    return cams;
}

GaussianCloud init_from_rows(const GaussianCloud& gt, const std::vector<int>& rows,
                             double sigma_p, Rng& rng, bool keep_colors) {
    int keep = static_cast<int>(rows.size());
    GaussianCloud cloud = GaussianCloud::create(keep, gt.sh_degree, true);
    std::vector<double>& md = cloud.means.mutable_data();
    const std::vector<double>& src = gt.means.data();
    for (int r = 0; r < keep; ++r)
        for (int c = 0; c < 3; ++c)
            md[3 * r + c] = src[3 * rows[r] + c] + sigma_p * rng.normal();
    // isotropic footprint from the nearest kept neighbor, 3DGS-style
    std::vector<double>& ls = cloud.log_scales.mutable_data();
    for (int r = 0; r < keep; ++r) {
        double s = keep > 1 ? footprint(nearest_d2(md, keep, r, &md[3 * r])) : 0.05;
        for (int c = 0; c < 3; ++c) ls[3 * r + c] = std::log(s);
    }
    std::vector<double>& op = cloud.opacity_logits.mutable_data();
    for (int r = 0; r < keep; ++r) op[r] = 2.2;
    if (keep_colors) {
        int cd = gt.color_dim();
        std::vector<double>& cdst = cloud.colors.mutable_data();
        const std::vector<double>& csrc = gt.colors.data();
        for (int r = 0; r < keep; ++r)
            for (int c = 0; c < cd; ++c) cdst[cd * r + c] = csrc[cd * rows[r] + c];
    }
    return cloud;
}

/// Shuffles `pool`, keeps size - floor(f * size) entries, restores index order.
std::vector<int> drop_from(std::vector<int> pool, double drop_fraction, Rng& rng) {
    int n = static_cast<int>(pool.size());
    int keep = n - static_cast<int>(std::floor(drop_fraction * n));
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform_int(0, i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(keep);
    std::sort(pool.begin(), pool.end());
    return pool;
}

void check_init_args(double sigma_p, double drop_fraction, const char* who) {
    if (!(sigma_p >= 0.0))
        throw ConfigError(std::string(who) + ": sigma_p must be >= 0, got " +
                          format_double(sigma_p));
    if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
        throw ConfigError(std::string(who) + ": drop_fraction must be in [0, 1), got " +
                          format_double(drop_fraction));
}

}  // namespace

void SceneRecipe::validate() const {
    if (recipe != "layered-planes" && recipe != "random-blobs" && recipe != "textured-box")
        throw ConfigError(
            "scene recipe must be one of layered-planes, random-blobs, textured-box; got '" +
            recipe + "'");
    if (width < 16 || height < 16)
        throw ConfigError("scene width and height must be >= 16, got " + std::to_string(width) +
                          "x" + std::to_string(height));
    if (gaussians < 50)
        throw ConfigError("scene gaussians must be >= 50, got " + std::to_string(gaussians));
    if (layers < 1) throw ConfigError("scene layers must be >= 1, got " + std::to_string(layers));
    if (views < 2) throw ConfigError("scene views must be >= 2, got " + std::to_string(views));
    if (train_views < 1 || train_views >= views)
        throw ConfigError("scene train_views must satisfy 1 <= train_views < views, got " +
                          std::to_string(train_views) + " of " + std::to_string(views));
    if (sh_degree != 0 && sh_degree != 1)
        throw ConfigError("scene sh_degree must be 0 or 1, got " + std::to_string(sh_degree));
}

void PriorModel::validate() const {
    if (!(gain > 0.0))
        throw ConfigError("prior gain must be > 0, got " + format_double(gain));
    if (!(noise_std >= 0.0))
        throw ConfigError("prior noise_std must be >= 0, got " + format_double(noise_std));
    if (radius < 0)
        throw ConfigError("prior radius must be >= 0, got " + std::to_string(radius));
}

SyntheticScene make_scene(const SceneRecipe& recipe, std::uint64_t seed) {
    recipe.validate();
    Rng rng(seed);
    Builder b;
    b.sh_degree = recipe.sh_degree;

    int wall = add_wall(b, rng, recipe.gaussians / 2);
    int content = recipe.gaussians - wall;
    if (recipe.recipe == "layered-planes") add_layered_planes(b, rng, recipe.layers, content);
    else if (recipe.recipe == "textured-box") add_textured_box(b, rng, content);
    while (b.count < recipe.gaussians) add_blob(b, rng);

    SyntheticScene scene;
    scene.ground_truth = b.build();
    scene.cameras = make_cameras(recipe);

    int V = recipe.views;
    int T = recipe.train_views;
    if (T == 1) scene.train_view_ids.push_back(V / 2);
    else
        for (int k = 0; k < T; ++k)
            scene.train_view_ids.push_back(
                static_cast<int>(std::lround(static_cast<double>(k) * (V - 1) / (T - 1))));
    for (int v = 0; v < V; ++v)
        if (std::find(scene.train_view_ids.begin(), scene.train_view_ids.end(), v) ==
            scene.train_view_ids.end())
            scene.heldout_view_ids.push_back(v);

    RenderConfig rc;
    for (int v = 0; v < V; ++v) {
        RenderOutput out = render(scene.ground_truth, scene.cameras[v], rc);
        int H = recipe.height, W = recipe.width;
        scene.gt_images.push_back(std::move(out.color));
        scene.gt_depths.push_back(std::move(out.depth));

        const std::vector<double>& av = out.alpha_acc.data();
        std::vector<unsigned char> mask(static_cast<size_t>(H) * W);
        int covered = 0;
        double sum = 0.0, sum2 = 0.0;
        const std::vector<double>& dv = scene.gt_depths.back().values.data();
        for (size_t p = 0; p < mask.size(); ++p) {
            mask[p] = av[p] >= 0.5 ? 1 : 0;
            if (mask[p]) {
                ++covered;
                sum += dv[p];
                sum2 += dv[p] * dv[p];
            }
        }
        double frac = static_cast<double>(covered) / static_cast<double>(mask.size());
        if (frac < kCoverageFloor)
            throw ContractError("make_scene: view " + std::to_string(v) + " alpha coverage " +
                                format_double(frac) + " is below " +
                                format_double(kCoverageFloor));
        double mean = sum / covered;
        double var = sum2 / covered - mean * mean;
        if (!(var > 0.0))
            throw ContractError("make_scene: view " + std::to_string(v) +
                                " has no depth variation over covered pixels");
        scene.gt_masks.push_back(std::move(mask));
    }
    return scene;
}

DepthMap simulate_prior(const DepthMap& d_true, const PriorModel& model, std::uint64_t seed) {
    model.validate();
    int H = d_true.height, W = d_true.width;
    Rng rng(seed);
    std::vector<double> out(static_cast<size_t>(H) * W);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            double acc = 0.0;
            int n = 0;
            for (int di = -model.radius; di <= model.radius; ++di) {
                int ii = i + di;
                if (ii < 0 || ii >= H) continue;
                for (int dj = -model.radius; dj <= model.radius; ++dj) {
                    int jj = j + dj;
                    if (jj < 0 || jj >= W) continue;
                    acc += d_true.at(ii, jj);
                    ++n;
                }
            }
            out[static_cast<size_t>(i) * W + j] =
                model.gain * (acc / n) + model.offset + model.noise_std * rng.normal();
        }
    }
    return DepthMap::from_values(H, W, std::move(out));
}

GaussianCloud dense_init(const SyntheticScene& scene, double sigma_p, double drop_fraction,
                         std::uint64_t seed, bool keep_colors) {
    check_init_args(sigma_p, drop_fraction, "dense_init");
    int N = scene.ground_truth.size();
    Rng rng(seed);
    std::vector<int> pool(N);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<int> rows = drop_from(std::move(pool), drop_fraction, rng);
    return init_from_rows(scene.ground_truth, rows, sigma_p, rng, keep_colors);
}

GaussianCloud sparse_init(const SyntheticScene& scene, double sigma_p, double drop_fraction,
                          std::uint64_t seed) {
    check_init_args(sigma_p, drop_fraction, "sparse_init");
    const GaussianCloud& gt = scene.ground_truth;
    const std::vector<double>& means = gt.means.data();
    std::vector<int> pool;
    for (int i = 0; i < gt.size(); ++i) {
        std::array<double, 3> p = {means[3 * i], means[3 * i + 1], means[3 * i + 2]};
        int hits = 0;
        for (int v : scene.train_view_ids) {
            const Camera& cam = scene.cameras[v];
            auto pc = cam.to_camera(p);
            if (pc[2] <= kZNear) continue;
            double x = cam.fx * pc[0] / pc[2] + cam.cx;
            double y = cam.fy * pc[1] / pc[2] + cam.cy;
            if (x >= 0.0 && x <= cam.width - 1 && y >= 0.0 && y <= cam.height - 1) ++hits;
        }
        if (hits >= 2) pool.push_back(i);
    }
    if (pool.empty())
        throw ContractError("sparse_init: no points visible in at least two training views");
    Rng rng(seed);
    std::vector<int> rows = drop_from(std::move(pool), drop_fraction, rng);
    return init_from_rows(gt, rows, sigma_p, rng, false);
}

}  // namespace splatlab
