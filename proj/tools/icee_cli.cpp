// Command-line driver for the example-selection experiments.
//
//   icee [--config FILE] [--seed N] [--out DIR] <subcommand>
//
// Exit codes: 0 success, 1 other failure, 2 invalid config, 3 missing artifact.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "icee/checkpoint.hpp"
#include "icee/config.hpp"
#include "icee/pipeline.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitMissing = 3;

void print_curves(const std::vector<icee::eval::CurvePoint>& curves) {
    for (const auto& c : curves)
        std::printf("%-16s p=%.2f  acc=%.4f +- %.4f  (%zu runs)\n", c.strategy.c_str(), c.p, c.mean_acc, c.std_acc,
                    c.runs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expertise-aware example selection experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.add_option("--out", out, "Output directory (overrides the config)");

    std::string user_name = "both";
    auto* gen = app.add_subcommand("gen-data", "Render the synthetic dataset");
    auto* train = app.add_subcommand("train-target", "Train the target classifier");
    auto* concepts = app.add_subcommand("concepts", "Discover concept vectors and the reconstruction map");
    auto* fit = app.add_subcommand("fit-user", "Fit expertise vectors for simulated users");
    fit->add_option("--user", user_name, "color_user, shape_user or both")
        ->check(CLI::IsMember({"color_user", "shape_user", "both", "color", "shape"}));
    auto* select = app.add_subcommand("select", "Rank the training pool with every configured strategy");
    auto* sweep = app.add_subcommand("sweep", "Simulatability over the budget grid for every strategy");
    auto* mm = app.add_subcommand("matched-mismatched", "Matched vs mismatched expertise experiment");
    auto* report = app.add_subcommand("report", "Re-render charts from results on disk");
    auto* all = app.add_subcommand("all", "Run every stage in order");

    CLI11_PARSE(app, argc, argv);

    try {
        icee::ExperimentConfig config = config_path.empty() ? icee::ExperimentConfig{} : icee::load_config(config_path);
        if (seed) config.seed = *seed;
        if (out) config.out_dir = *out;
        config.validate();

        auto fit_users = [&] {
            if (user_name == "both") {
                for (auto kind : {icee::synth::UserKind::color_user, icee::synth::UserKind::shape_user}) {
                    const auto u = icee::pipeline::fit_user(config, kind);
                    std::printf("%s: agreement %.4f\n", std::string(icee::synth::to_string(kind)).c_str(),
                                u.agreement);
                }
            } else {
                const auto kind = icee::synth::parse_user_kind(user_name);
                const auto u = icee::pipeline::fit_user(config, kind);
                std::printf("%s: agreement %.4f\n", std::string(icee::synth::to_string(kind)).c_str(), u.agreement);
            }
        };

        if (*gen || *all) {
            const auto split = icee::pipeline::gen_data(config);
            std::printf("dataset: %zu train, %zu test\n", split.train.size(), split.test.size());
        }
        if (*train || *all) {
            const auto t = icee::pipeline::train_target(config);
            std::printf("target test accuracy %.4f\n", t.test_accuracy);
        }
        if (*concepts || *all) {
            const auto c = icee::pipeline::discover_concepts(config);
            std::printf("concept fidelity %.4f\n", c.fidelity);
        }
        if (*fit || *all) fit_users();
        if (*select || *all) {
            const auto rankings = icee::pipeline::select(config);
            std::printf("wrote %zu rankings to %s\n", rankings.size(),
                        icee::pipeline::Layout{config.out_dir}.rankings().string().c_str());
        }
        if (*sweep || *all) print_curves(icee::pipeline::sweep(config));
        if (*mm || *all) {
            const auto r = icee::pipeline::matched_mismatched(config);
            print_curves(r.matched);
            print_curves(r.mismatched);
        }
        if (*report) icee::pipeline::report(config);
    } catch (const icee::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitBadConfig;
    } catch (const icee::ArtifactMissing& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kExitMissing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return 0;
}
