#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icee/config.hpp"
#include "icee/selection.hpp"
#include "icee/user_model.hpp"

namespace icee::eval {

struct CurvePoint {
    std::string strategy;
    double p = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0;  // sample standard deviation over runs, 0 for a single run
    std::size_t runs = 0;
    std::vector<double> per_run;
};

// Held-out items as seen by the user model: concept scores plus the target's
// prediction, which is what simulatability compares against.
struct TestSet {
    std::vector<Tensor> scores;
    std::vector<std::size_t> target_labels;
};

TestSet make_test_set(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                      const concepts::ConceptModel& model);

// Fraction of test items where argmax g_omega equals the target prediction.
double simulatability(const Tensor& omega, const TestSet& test, const concepts::ConceptModel& model);
double simulatability(const Tensor& omega, std::span<const synth::LabeledImage> images,
                      const target::ConvNetParams& target, const concepts::ConceptModel& model);

// Everything a sweep reads; all of it is fixed for one master seed.
struct SweepInputs {
    const concepts::ConceptModel* model = nullptr;
    const selection::CandidatePool* pool = nullptr;
    const TestSet* test = nullptr;
};

// Fits omega for `kind` on the pool's plain scores against its annotations.
user::ExpertiseVector fit_user_on_pool(const SweepInputs& in, const user::AnnotationSet& annotations,
                                       synth::UserKind kind, const user::FitHyper& hyper, std::uint64_t seed);

// Retrains from `start` on the first M ids of `ranking` and evaluates.
double retrain_and_score(const SweepInputs& in, const user::ExpertiseVector& start,
                         const selection::SelectionRanking& ranking, std::size_t m, const ExperimentConfig& config,
                         std::uint64_t seed);

// Retraining seed of one (budget index, run) cell, shared by every strategy.
std::uint64_t retrain_seed(std::uint64_t master, std::size_t p_index, std::size_t run);

std::vector<CurvePoint> run_sweep(const SweepInputs& in, const user::ExpertiseVector& user,
                                  const user::AnnotationSet& annotations, const ExperimentConfig& config);

struct MatchedMismatched {
    std::vector<CurvePoint> matched;
    std::vector<CurvePoint> mismatched;
};

// Both curves retrain user A; the matched curve ranks examples by
// hypercorrection under A's omega, the mismatched one under B's.
MatchedMismatched matched_mismatched(const SweepInputs& in, const user::ExpertiseVector& user_a,
                                     const user::ExpertiseVector& user_b, const ExperimentConfig& config);

CurvePoint summarize(std::string strategy, double p, std::vector<double> accuracies);

}  // namespace icee::eval
