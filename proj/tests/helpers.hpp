#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "icee/concepts.hpp"
#include "icee/rng.hpp"
#include "icee/target_model.hpp"
#include "icee/tensor.hpp"

namespace testutil {

inline icee::Tensor random_tensor(icee::RngStream& rng, icee::Shape shape, double scale = 1.0) {
    icee::Tensor t(std::move(shape));
    for (double& v : t.values()) v = scale * rng.normal();
    return t;
}

inline icee::Tensor random_image(icee::RngStream& rng) {
    icee::Tensor t({3, 32, 32});
    for (double& v : t.values()) v = rng.uniform();
    return t;
}

inline icee::target::ConvNetParams random_target(std::uint64_t seed) {
    icee::RngStream rng(seed);
    return icee::target::init_params(rng);
}

// Untrained but valid concept model: random unit concepts, random W, b and head.
inline icee::concepts::ConceptModel random_concept_model(std::uint64_t seed, std::size_t m = 8) {
    icee::RngStream rng(seed);
    icee::concepts::ConceptModel model;
    model.bank.vectors = random_tensor(rng, {m, icee::target::kFeatures});
    for (std::size_t j = 0; j < m; ++j) {
        double norm = 0.0;
        for (std::size_t k = 0; k < icee::target::kFeatures; ++k)
            norm += model.bank.vectors.at(j, k) * model.bank.vectors.at(j, k);
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < icee::target::kFeatures; ++k) model.bank.vectors.at(j, k) /= norm;
    }
    model.bank.trained = true;
    model.recon.weights = random_tensor(rng, {icee::target::kFeatures, m}, 0.5);
    model.recon.bias = random_tensor(rng, {icee::target::kFeatures}, 0.5);
    model.head.weights = random_tensor(rng, {icee::target::kClasses, icee::target::kFeatures}, 0.5);
    model.head.bias = random_tensor(rng, {icee::target::kClasses}, 0.5);
    model.hyper.m = m;
    return model;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("icee_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
