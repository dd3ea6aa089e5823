// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splatlab/priors.hpp"
#include "splatlab/trainer.hpp"

namespace splatlab {

/// Ablation switches for the depth term. Both off trains photometric-only;
/// enable_pc alone uses the image-level correlation baseline; enable_hd alone
/// uses the multi-scale loss with its correlation weight forced to zero; both
/// on uses the multi-scale loss as configured.
struct AblationFlags {
    bool enable_hd = true;
    bool enable_pc = true;
};

struct InitSpec {
    std::string mode = "dense";  // dense | sparse
    double jitter = 0.1;         // positional sigma, meters
    double drop = 0.0;           // fraction of points removed
    bool keep_colors = false;
};

/// Depth-prior corruption in units relative to each view: the additive noise
/// std is noise_rel times the std of that view's ground-truth depth over its
/// covered pixels.
struct PriorSpec {
    double gain = 1.0;
    double offset = 0.0;
    double noise_rel = 0.0;
    int radius = 0;
};

/// One fully resolved experiment variant.
struct VariantConfig {
    std::string name = "default";
    SceneRecipe scene;
    std::uint64_t scene_seed = 1;
    PriorSpec prior;
    InitSpec init;
    TrainConfig train;
    AblationFlags ablation;
};

struct RunOverrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;  // replaces the scene seed (and train.seed)
    std::optional<int> iterations;
};

struct VariantResult {
    std::string name;
    std::uint64_t scene_seed = 0;
    int iterations = 0;
    double psnr = 0;
    double ssim = 0;
    double depth_pearson = 0;
    std::string dir;  // artifact directory
};

/// Derives the trainer's depth mode and loss adjustments from ablation flags.
void apply_ablation(const AblationFlags& flags, TrainConfig& train);

/// Per-view prior stack for the train views of `scene`, seeded from scene_seed.
std::vector<DepthMap> make_train_priors(const SyntheticScene& scene, const PriorSpec& spec,
                                        std::uint64_t scene_seed);

/// Runs one resolved variant, writing report.csv, summary.csv, summary.json,
/// checkpoint.bin, held-out renders, and manifest.json into `dir`.
VariantResult run_variant(const VariantConfig& cfg, const std::string& dir);

/// Loads a config file (JSON; unknown keys rejected with their path), applies
/// overrides, runs the single experiment or every sweep variant, and writes
/// sweep_summary.csv when a sweep is present. Returns one result per variant.
std::vector<VariantResult> run_experiment_file(const std::string& config_path,
                                               const RunOverrides& ovr);

/// Ranks ≥ 2 per-run summary.csv files by held-out PSNR (SSIM breaks ties).
/// All summaries must agree on the scene seed. Returns an aligned text table;
/// also writes the ranking as CSV to out_csv unless it is empty.
std::string compare_summaries(const std::vector<std::string>& csv_paths,
                              const std::string& out_csv);

}  // namespace splatlab
