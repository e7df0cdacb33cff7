#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icee/concepts.hpp"
#include "icee/explain.hpp"
#include "icee/plda.hpp"
#include "icee/rng.hpp"
#include "icee/synthdata.hpp"
#include "icee/target_model.hpp"
#include "icee/user_model.hpp"

namespace icee::selection {

enum class Strategy { hypercorrection, random, egl, egl_shift, dwm, bt };

inline constexpr std::array<Strategy, 6> kAllStrategies{Strategy::hypercorrection, Strategy::random, Strategy::egl,
                                                        Strategy::egl_shift, Strategy::dwm, Strategy::bt};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

// An image shown to the user: the image, the explanation for the target's
// prediction, and that prediction.
struct Candidate {
    std::uint64_t id = 0;
    const Tensor* image = nullptr;
    explain::Saliency saliency;  // explained_class == label
    std::size_t label = 0;       // f(x)
    Tensor plain_scores;         // concept scores of x
    Tensor masked_scores;        // concept scores of x masked by e
    Tensor latent;               // pooled final-block features
};

using CandidatePool = std::vector<Candidate>;

CandidatePool build_pool(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                         const concepts::ConceptModel& model,
                         explain::SaliencyNorm norm = explain::SaliencyNorm::max);

struct SelectionRanking {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::uint64_t, double>> entries;  // (image id, score), best first

    std::vector<std::uint64_t> ids() const;
};

// Mean over positions of the activation stack.
Tensor latent_feature(const target::ConvNetParams& target, const Tensor& image);

// g(y | x) - g(y | x, e)
double hypercorrection_score(const Tensor& omega, const Tensor& plain_scores, const Tensor& masked_scores,
                             std::size_t label, const concepts::ConceptModel& model);
double hypercorrection_score(const Tensor& omega, const Tensor& image, const Tensor& saliency, std::size_t label,
                             const target::ConvNetParams& target, const concepts::ConceptModel& model);

// sum_y g(y | input) * || d CE(input, y) / d omega ||
double egl_score(const Tensor& omega, const Tensor& scores, const concepts::ConceptModel& model);
double egl_shift_score(const Tensor& omega, const Tensor& plain_scores, const Tensor& masked_scores,
                       const concepts::ConceptModel& model);

// Mean cosine similarity between a latent and every pool latent; zero-norm
// latents contribute 0.
double density_factor(const Tensor& latent, std::span<const Tensor> pool_latents);

inline constexpr double kDwmBeta = 1.0;

double dwm_score(double base_score, double density, double beta = kDwmBeta);

// Sorted by descending score, ties to the lower id, truncated to k.
SelectionRanking rank_and_select(std::vector<std::pair<std::uint64_t, double>> scores, std::size_t k,
                                 std::string strategy = {}, std::uint64_t seed = 0);

// k ids drawn uniformly without replacement; score = k - rank.
SelectionRanking random_select(RngStream& rng, std::span<const std::uint64_t> pool, std::size_t k);

struct StrategyOptions {
    bool dwm_masked_base = true;
    bool bt_exemplar = false;  // tau^y from one sampled exemplar instead of the class mean
};

// Full ranking of the pool for a deterministic strategy or one random draw.
// `annotations` feeds the PLDA user model of the BT baseline.
SelectionRanking rank_pool(Strategy strategy, const CandidatePool& pool, const user::ExpertiseVector& user,
                           const user::AnnotationSet& annotations, const concepts::ConceptModel& model,
                           std::uint64_t seed, const StrategyOptions& options = {});

// BT baseline: PLDA on pool latents with the user's labels, candidates scored
// by the predictive density of their target label mapped into the user's classes.
SelectionRanking rank_bt(const CandidatePool& pool, const user::AnnotationSet& annotations, synth::UserKind kind,
                         std::uint64_t seed, bool exemplar);

// strategy,seed,rank,image_id,score with 17 significant digits.
void write_ranking_csv(std::ostream& os, const SelectionRanking& ranking, bool header = true);

}  // namespace icee::selection
