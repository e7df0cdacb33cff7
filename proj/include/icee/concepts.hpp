#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "icee/synthdata.hpp"
#include "icee/target_model.hpp"
#include "icee/tensor.hpp"

namespace icee::concepts {

// m unit-norm concept directions in activation space.
struct ConceptBank {
    Tensor vectors;  // m x n
    bool trained = false;

    std::size_t count() const { return vectors.dim(0); }
};

// Affine map from m concept scores back to an n-dim activation vector,
// shared across positions.
struct ReconMap {
    Tensor weights;  // n x m
    Tensor bias;     // n
};

// pca: C from the leading principal directions of per-image mean unit
// activations, W and b by least squares on pooled activations.
// random: Gaussian C and W, b at the mean activation.
enum class ConceptInit { pca, random };

ConceptInit parse_concept_init(std::string_view name);
std::string_view to_string(ConceptInit init);

struct DiscoveryHyper {
    std::size_t m = 8;
    ConceptInit init = ConceptInit::pca;
    double lr = 1e-3;
    std::size_t epochs = 20;
    std::size_t batch = 32;
};

// Everything g_omega and the conceptized model need besides the extractor.
struct ConceptModel {
    ConceptBank bank;
    ReconMap recon;
    target::Head head;  // frozen copy of the target head
    DiscoveryHyper hyper;
    std::uint64_t seed = 0;
    double fidelity = 0.0;  // on the test split
    std::vector<double> epoch_losses;
};

// Unit-normalizes each of the T rows; zero rows stay zero.
Tensor normalize_positions(const Tensor& stack);

// S[j, i] = <normalize(psi_i), c_j>, an m x T matrix.
Tensor concept_scores(const Tensor& stack, const ConceptBank& bank);
// Same, for a stack whose rows are already normalized.
Tensor concept_scores_normalized(const Tensor& unit_stack, const Tensor& concept_vectors);

// Reconstructs each position (W S[:, i] + b) and applies the head.
Tensor logits_from_scores(const Tensor& scores, const ReconMap& recon, const target::Head& head);

Tensor conceptized_forward(const Tensor& image, const target::ConvNetParams& target, const ConceptModel& model);

struct ConceptGrads {
    double loss = 0.0;
    Tensor logits;
    Tensor concepts;  // m x n
    Tensor weights;   // n x m
    Tensor bias;      // n
};

// Cross-entropy of the conceptized head against `label` for one normalized
// stack, with gradients for concepts, reconstruction weights and bias.
ConceptGrads concept_loss_and_grads(const Tensor& unit_stack, std::size_t label, const Tensor& concept_vectors,
                                    const ReconMap& recon, const target::Head& head);

ConceptModel discover_concepts(const synth::DatasetSplit& split, const target::ConvNetParams& target,
                               const DiscoveryHyper& hyper, std::uint64_t seed);

// Fraction of images where the conceptized model and the target agree.
double fidelity(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                const ConceptModel& model);

void save_concepts(const std::filesystem::path& dir, const ConceptModel& model);
ConceptModel load_concepts(const std::filesystem::path& dir);

}  // namespace icee::concepts
