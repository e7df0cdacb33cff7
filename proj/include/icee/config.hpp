#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "icee/concepts.hpp"
#include "icee/explain.hpp"
#include "icee/selection.hpp"
#include "icee/synthdata.hpp"
#include "icee/target_model.hpp"
#include "icee/user_model.hpp"

namespace icee {

// Raised for malformed or out-of-range configuration.
struct ConfigError : InvalidInput {
    using InvalidInput::InvalidInput;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t n_per_class = 300;
    target::TrainHyper target;
    concepts::DiscoveryHyper concepts;
    user::FitHyper user;
    std::vector<selection::Strategy> strategies{selection::kAllStrategies.begin(), selection::kAllStrategies.end()};
    std::vector<double> p_grid{0.10, 0.15, 0.20, 0.25, 0.30};
    std::size_t runs = 5;
    std::filesystem::path out_dir = "out";

    synth::UserKind sweep_user = synth::UserKind::color_user;
    bool masked_retraining = false;
    bool bt_exemplar = false;
    bool dwm_masked_base = true;
    bool refit_users_per_run = false;
    explain::SaliencyNorm saliency_norm = explain::SaliencyNorm::max;

    void validate() const;
    selection::StrategyOptions strategy_options() const { return {dwm_masked_base, bt_exemplar}; }
};

// Unknown keys are rejected so that typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// M = ceil(p * N), guarded against p * N landing a rounding error above an integer.
std::size_t budget_size(double p, std::size_t pool_size);

}  // namespace icee
