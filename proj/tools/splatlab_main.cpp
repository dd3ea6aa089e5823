// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "splatlab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"splatlab: differentiable Gaussian-splat lab with multi-scale depth supervision"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int iterations = 0;
    CLI::App* run = app.add_subcommand("run", "run one experiment config (or its sweep)");
    run->add_option("config", config_path, "JSON experiment config")->required();
    CLI::Option* out_opt = run->add_option("--out", out_dir, "output directory override");
    CLI::Option* seed_opt = run->add_option("--seed", seed, "scene/train seed override");
    CLI::Option* iter_opt = run->add_option("--iterations", iterations, "iteration count override");

    std::vector<std::string> summaries;
    std::string out_file;
    CLI::App* compare = app.add_subcommand("compare", "rank summary.csv files from matching scenes");
    compare->add_option("summaries", summaries, "two or more summary.csv paths")
        ->required()
        ->expected(-2);
    compare->add_option("--out", out_file, "also write the ranking as CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            splatlab::RunOverrides ovr;
            if (*out_opt) ovr.out = out_dir;
            if (*seed_opt) ovr.seed = seed;
            if (*iter_opt) ovr.iterations = iterations;
            auto results = splatlab::run_experiment_file(config_path, ovr);
            for (const auto& r : results)
                std::cout << r.name << ": psnr=" << r.psnr << " ssim=" << r.ssim
                          << " depth_pearson=" << r.depth_pearson << " -> " << r.dir << "\n";
        } else {
            std::cout << splatlab::compare_summaries(summaries, out_file);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
