#include "icee/eval.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "icee/ops.hpp"

namespace icee::eval {

TestSet make_test_set(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                      const concepts::ConceptModel& model) {
    TestSet out;
    out.scores.reserve(images.size());
    out.target_labels.reserve(images.size());
    for (const auto& img : images) {
        const auto fwd = target::forward(target, img.pixels);
        out.scores.push_back(concepts::concept_scores(fwd.stack, model.bank));
        out.target_labels.push_back(argmax(fwd.logits.values()));
    }
    return out;
}

double simulatability(const Tensor& omega, const TestSet& test, const concepts::ConceptModel& model) {
    if (test.scores.empty()) throw InvalidInput("simulatability: empty test set");
    return user::agreement(omega, test.scores, test.target_labels, model);
}

double simulatability(const Tensor& omega, std::span<const synth::LabeledImage> images,
                      const target::ConvNetParams& target, const concepts::ConceptModel& model) {
    if (images.empty()) throw InvalidInput("simulatability: empty test set");
    return simulatability(omega, make_test_set(images, target, model), model);
}

user::ExpertiseVector fit_user_on_pool(const SweepInputs& in, const user::AnnotationSet& annotations,
                                       synth::UserKind kind, const user::FitHyper& hyper, std::uint64_t seed) {
    if (annotations.empty()) throw InvalidInput("fit_user_on_pool: empty annotations");
    std::vector<Tensor> scores;
    std::vector<std::size_t> labels;
    for (const auto& c : *in.pool) {
        auto it = annotations.find(c.id);
        if (it == annotations.end()) continue;
        scores.push_back(c.plain_scores);
        labels.push_back(it->second);
    }
    auto out = user::fit_omega(scores, labels, *in.model, hyper, seed, Tensor({in.model->bank.count()}, 1.0));
    out.user = kind;
    return out;
}

double retrain_and_score(const SweepInputs& in, const user::ExpertiseVector& start,
                         const selection::SelectionRanking& ranking, std::size_t m, const ExperimentConfig& config,
                         std::uint64_t seed) {
    if (m > ranking.entries.size()) throw InvalidInput("retrain_and_score: budget exceeds ranking length");
    std::map<std::uint64_t, const selection::Candidate*> by_id;
    for (const auto& c : *in.pool) by_id.emplace(c.id, &c);
    std::vector<Tensor> scores;
    std::vector<std::size_t> labels;
    scores.reserve(m);
    labels.reserve(m);
    for (std::size_t r = 0; r < m; ++r) {
        const auto* c = by_id.at(ranking.entries[r].first);
        scores.push_back(config.masked_retraining ? c->masked_scores : c->plain_scores);
        labels.push_back(c->label);
    }
    const auto retrained = user::retrain_from_scores(start, scores, labels, *in.model, config.user, seed);
    return simulatability(retrained.omega, *in.test, *in.model);
}

std::uint64_t retrain_seed(std::uint64_t master, std::size_t p_index, std::size_t run) {
    return RngStream(master).substream("sweep/retrain", (static_cast<std::uint64_t>(run) << 16) | p_index).key();
}

CurvePoint summarize(std::string strategy, double p, std::vector<double> accuracies) {
    if (accuracies.empty()) throw InvalidInput("summarize: no runs");
    CurvePoint pt;
    pt.strategy = std::move(strategy);
    pt.p = p;
    pt.runs = accuracies.size();
    const double n = static_cast<double>(accuracies.size());
    pt.mean_acc = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
    if (accuracies.size() > 1) {
        double ss = 0.0;
        for (double a : accuracies) ss += (a - pt.mean_acc) * (a - pt.mean_acc);
        pt.std_acc = std::sqrt(ss / (n - 1.0));
    }
    pt.per_run = std::move(accuracies);
    return pt;
}

namespace {

void check_inputs(const SweepInputs& in) {
    if (in.model == nullptr || in.pool == nullptr || in.test == nullptr)
        throw InvalidInput("sweep inputs are incomplete");
    if (in.pool->empty()) throw InvalidInput("sweep: empty candidate pool");
}

}  // namespace

std::vector<CurvePoint> run_sweep(const SweepInputs& in, const user::ExpertiseVector& user,
                                  const user::AnnotationSet& annotations, const ExperimentConfig& config) {
    check_inputs(in);
    config.validate();
    const auto options = config.strategy_options();
    const std::size_t pool_size = in.pool->size();

    // acc[strategy][p][run]
    std::vector<std::vector<std::vector<double>>> acc(
        config.strategies.size(), std::vector<std::vector<double>>(config.p_grid.size()));

    // Deterministic rankings are reused across runs unless the user is refit.
    std::vector<std::optional<selection::SelectionRanking>> cached(config.strategies.size());
    for (std::size_t run = 0; run < config.runs; ++run) {
        user::ExpertiseVector start = user;
        if (config.refit_users_per_run) {
            start = fit_user_on_pool(in, annotations, user.user, config.user,
                                     RngStream(config.seed).substream("sweep/refit", run).key());
            for (auto& c : cached) c.reset();
        }
        for (std::size_t s = 0; s < config.strategies.size(); ++s) {
            const auto strategy = config.strategies[s];
            selection::SelectionRanking ranking;
            if (strategy == selection::Strategy::random) {
                ranking = selection::rank_pool(strategy, *in.pool, start, annotations, *in.model,
                                               RngStream(config.seed).substream("sweep/random", run).key(), options);
            } else {
                if (!cached[s])
                    cached[s] = selection::rank_pool(strategy, *in.pool, start, annotations, *in.model, config.seed,
                                                     options);
                ranking = *cached[s];
            }
            for (std::size_t pi = 0; pi < config.p_grid.size(); ++pi)
                acc[s][pi].push_back(retrain_and_score(in, start, ranking, budget_size(config.p_grid[pi], pool_size),
                                                       config, retrain_seed(config.seed, pi, run)));
        }
    }

    std::vector<CurvePoint> out;
    for (std::size_t s = 0; s < config.strategies.size(); ++s)
        for (std::size_t pi = 0; pi < config.p_grid.size(); ++pi)
            out.push_back(summarize(std::string(selection::to_string(config.strategies[s])), config.p_grid[pi],
                                    std::move(acc[s][pi])));
    return out;
}

MatchedMismatched matched_mismatched(const SweepInputs& in, const user::ExpertiseVector& user_a,
                                     const user::ExpertiseVector& user_b, const ExperimentConfig& config) {
    check_inputs(in);
    config.validate();
    const auto options = config.strategy_options();
    const user::AnnotationSet none;
    const auto matched_rank =
        selection::rank_pool(selection::Strategy::hypercorrection, *in.pool, user_a, none, *in.model, config.seed,
                             options);
    const auto mismatched_rank =
        selection::rank_pool(selection::Strategy::hypercorrection, *in.pool, user_b, none, *in.model, config.seed,
                             options);
    MatchedMismatched out;
    for (std::size_t pi = 0; pi < config.p_grid.size(); ++pi) {
        const std::size_t m = budget_size(config.p_grid[pi], in.pool->size());
        std::vector<double> a, b;
        for (std::size_t run = 0; run < config.runs; ++run) {
            const auto seed = retrain_seed(config.seed, pi, run);
            a.push_back(retrain_and_score(in, user_a, matched_rank, m, config, seed));
            b.push_back(retrain_and_score(in, user_a, mismatched_rank, m, config, seed));
        }
        out.matched.push_back(summarize("matched", config.p_grid[pi], std::move(a)));
        out.mismatched.push_back(summarize("mismatched", config.p_grid[pi], std::move(b)));
    }
    return out;
}

}  // namespace icee::eval
