#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "icee/concepts.hpp"
#include "icee/synthdata.hpp"
#include "icee/target_model.hpp"
#include "icee/tensor.hpp"

namespace icee::user {

// Per-user concept weights in [0, 1]^m.
struct ExpertiseVector {
    Tensor omega;  // m
    synth::UserKind user = synth::UserKind::color_user;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::vector<double> loss_curve;
    double agreement = 0.0;  // with the labels it was fitted on
};

// image id -> label the simulated user would assign.
using AnnotationSet = std::map<std::uint64_t, std::size_t>;

AnnotationSet simulate_annotations(const synth::DatasetSplit& split, synth::UserKind kind);

struct FitHyper {
    double lr = 1e-2;
    std::size_t epochs = 40;
    std::size_t batch = 32;
};

// Concept scores of one image, the only input g_omega depends on.
Tensor image_scores(const Tensor& image, const target::ConvNetParams& target, const concepts::ConceptModel& model);

// Scales row j of the m x T score matrix by omega_j.
Tensor scale_scores(const Tensor& scores, const Tensor& omega);

Tensor user_logits(const Tensor& omega, const Tensor& scores, const concepts::ConceptModel& model);
std::vector<double> user_dist_from_scores(const Tensor& omega, const Tensor& scores,
                                          const concepts::ConceptModel& model);

// g_omega(. | x) or, with a saliency map, g_omega(. | x, e) on the masked image.
std::vector<double> user_predict_dist(const Tensor& omega, const Tensor& image, const target::ConvNetParams& target,
                                      const concepts::ConceptModel& model,
                                      const std::optional<Tensor>& saliency = std::nullopt);

struct OmegaGrad {
    double loss = 0.0;
    std::vector<double> probs;
    Tensor grad;  // d CE / d omega
};

OmegaGrad omega_loss_and_grad(const Tensor& omega, const Tensor& scores, std::size_t label,
                              const concepts::ConceptModel& model);

// Minimizes mean cross-entropy over (scores, label) pairs with respect to
// omega only, clipping to [0, 1] after each Adam step.
ExpertiseVector fit_omega(std::span<const Tensor> scores, std::span<const std::size_t> labels,
                          const concepts::ConceptModel& model, const FitHyper& hyper, std::uint64_t seed,
                          const Tensor& init);

ExpertiseVector fit_expertise(const synth::DatasetSplit& split, const AnnotationSet& annotations,
                              synth::UserKind kind, const target::ConvNetParams& target,
                              const concepts::ConceptModel& model, const FitHyper& hyper, std::uint64_t seed);

struct Example {
    const Tensor* image = nullptr;
    std::size_t label = 0;                // target prediction f(x)
    const Tensor* saliency = nullptr;     // only used in masked retraining
};

// Refits omega on example images labelled by the target. An empty example
// list returns the input unchanged.
ExpertiseVector retrain_user(const ExpertiseVector& start, std::span<const Example> examples,
                             const target::ConvNetParams& target, const concepts::ConceptModel& model,
                             const FitHyper& hyper, std::uint64_t seed, bool masked = false);

// Same, for examples whose concept scores are already computed.
ExpertiseVector retrain_from_scores(const ExpertiseVector& start, std::span<const Tensor> scores,
                                    std::span<const std::size_t> labels, const concepts::ConceptModel& model,
                                    const FitHyper& hyper, std::uint64_t seed);

double agreement(const Tensor& omega, std::span<const Tensor> scores, std::span<const std::size_t> labels,
                 const concepts::ConceptModel& model);

void save_user(const std::filesystem::path& dir, const ExpertiseVector& user);
ExpertiseVector load_user(const std::filesystem::path& dir);

}  // namespace icee::user
