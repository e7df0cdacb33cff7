#include "icee/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "icee/ops.hpp"

namespace icee::selection {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::hypercorrection: return "hypercorrection";
        case Strategy::random: return "random";
        case Strategy::egl: return "egl";
        case Strategy::egl_shift: return "egl_shift";
        case Strategy::dwm: return "dwm";
        case Strategy::bt: return "bt";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : kAllStrategies)
        if (to_string(s) == name) return s;
    throw InvalidInput("unknown strategy '" + std::string(name) + "'");
}

std::vector<std::uint64_t> SelectionRanking::ids() const {
    std::vector<std::uint64_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.first);
    return out;
}

Tensor latent_feature(const target::ConvNetParams& target, const Tensor& image) {
    return target::pool_positions(target::forward(target, image).stack);
}

CandidatePool build_pool(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                         const concepts::ConceptModel& model, explain::SaliencyNorm norm) {
    CandidatePool pool;
    pool.reserve(images.size());
    for (const auto& img : images) {
        Candidate c;
        c.id = img.id;
        c.image = &img.pixels;
        const auto fwd = target::forward(target, img.pixels);
        c.label = argmax(fwd.logits.values());
        c.saliency = explain::gradcam(target, img.pixels, c.label, norm);
        c.saliency.image_id = img.id;
        c.plain_scores = concepts::concept_scores(fwd.stack, model.bank);
        c.masked_scores = user::image_scores(explain::apply_mask(img.pixels, c.saliency.map), target, model);
        c.latent = target::pool_positions(fwd.stack);
        pool.push_back(std::move(c));
    }
    return pool;
}

double hypercorrection_score(const Tensor& omega, const Tensor& plain_scores, const Tensor& masked_scores,
                             std::size_t label, const concepts::ConceptModel& model) {
    const auto plain = user::user_dist_from_scores(omega, plain_scores, model);
    const auto masked = user::user_dist_from_scores(omega, masked_scores, model);
    if (label >= plain.size()) throw InvalidInput("hypercorrection_score: label out of range");
    return plain[label] - masked[label];
}

double hypercorrection_score(const Tensor& omega, const Tensor& image, const Tensor& saliency, std::size_t label,
                             const target::ConvNetParams& target, const concepts::ConceptModel& model) {
    return hypercorrection_score(omega, user::image_scores(image, target, model),
                                 user::image_scores(explain::apply_mask(image, saliency), target, model), label,
                                 model);
}

double egl_score(const Tensor& omega, const Tensor& scores, const concepts::ConceptModel& model) {
    const auto probs = user::user_dist_from_scores(omega, scores, model);
    double total = 0.0;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        const auto g = user::omega_loss_and_grad(omega, scores, y, model);
        total += probs[y] * l2_norm(g.grad.values());
    }
    return total;
}

double egl_shift_score(const Tensor& omega, const Tensor& plain_scores, const Tensor& masked_scores,
                       const concepts::ConceptModel& model) {
    return egl_score(omega, masked_scores, model) - egl_score(omega, plain_scores, model);
}

double density_factor(const Tensor& latent, std::span<const Tensor> pool_latents) {
    if (pool_latents.empty()) throw InvalidInput("density_factor: empty pool");
    const auto x = l2_normalize(latent.values());
    double total = 0.0;
    for (const auto& other : pool_latents) {
        const auto u = l2_normalize(other.values());
        total += dot(x.v, u.v);
    }
    return total / static_cast<double>(pool_latents.size());
}

double dwm_score(double base_score, double density, double beta) { return base_score * std::pow(density, beta); }

SelectionRanking rank_and_select(std::vector<std::pair<std::uint64_t, double>> scores, std::size_t k,
                                 std::string strategy, std::uint64_t seed) {
    if (k > scores.size())
        throw InvalidInput("rank_and_select: k = " + std::to_string(k) + " exceeds pool of " +
                           std::to_string(scores.size()));
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    scores.resize(k);
    return {std::move(strategy), seed, std::move(scores)};
}

SelectionRanking random_select(RngStream& rng, std::span<const std::uint64_t> pool, std::size_t k) {
    if (k > pool.size())
        throw InvalidInput("random_select: k = " + std::to_string(k) + " exceeds pool of " +
                           std::to_string(pool.size()));
    std::vector<std::uint64_t> ids(pool.begin(), pool.end());
    // Partial Fisher-Yates: the first k slots are a uniform draw without replacement.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(ids.size() - i));
        std::swap(ids[i], ids[j]);
    }
    SelectionRanking r{"random", rng.key(), {}};
    for (std::size_t i = 0; i < k; ++i) r.entries.emplace_back(ids[i], static_cast<double>(k - i));
    return r;
}

SelectionRanking rank_bt(const CandidatePool& pool, const user::AnnotationSet& annotations, synth::UserKind kind,
                         std::uint64_t seed, bool exemplar) {
    if (pool.empty()) throw InvalidInput("rank_bt: empty pool");
    const Eigen::Index d = static_cast<Eigen::Index>(pool.front().latent.size());
    std::vector<std::size_t> rows, labels;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto it = annotations.find(pool[i].id);
        if (it == annotations.end()) continue;
        rows.push_back(i);
        labels.push_back(it->second);
    }
    Eigen::MatrixXd latents(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r)
        latents.row(static_cast<Eigen::Index>(r)) =
            Eigen::Map<const Eigen::VectorXd>(pool[rows[r]].latent.data(), d).transpose();
    plda::PldaModel model = plda::plda_fit(latents, labels);

    if (exemplar) {
        // Replace each class mean by one exemplar drawn from that class.
        RngStream rng = RngStream(seed).substream("bt/exemplar");
        for (auto& [cls, mean] : model.class_means) {
            std::vector<std::size_t> members;
            for (std::size_t r = 0; r < rows.size(); ++r)
                if (labels[r] == cls) members.push_back(r);
            const std::size_t pick = members[rng.uniform_index(members.size())];
            mean = model.project(latents.row(static_cast<Eigen::Index>(pick)).transpose());
        }
    }

    std::vector<std::pair<std::uint64_t, double>> scores;
    for (const auto& c : pool) {
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(c.latent.data(), d);
        scores.emplace_back(c.id, plda::bt_score(model, x, synth::user_class(c.label, kind)));
    }
    return rank_and_select(std::move(scores), pool.size(), "bt", seed);
}

SelectionRanking rank_pool(Strategy strategy, const CandidatePool& pool, const user::ExpertiseVector& user,
                           const user::AnnotationSet& annotations, const concepts::ConceptModel& model,
                           std::uint64_t seed, const StrategyOptions& options) {
    if (pool.empty()) throw InvalidInput("rank_pool: empty pool");
    std::vector<std::pair<std::uint64_t, double>> scores;
    scores.reserve(pool.size());
    const Tensor& omega = user.omega;
    switch (strategy) {
        case Strategy::random: {
            std::vector<std::uint64_t> ids;
            for (const auto& c : pool) ids.push_back(c.id);
            RngStream rng = RngStream(seed).substream("select/random");
            return random_select(rng, ids, ids.size());
        }
        case Strategy::bt:
            return rank_bt(pool, annotations, user.user, seed, options.bt_exemplar);
        case Strategy::hypercorrection:
            for (const auto& c : pool)
                scores.emplace_back(c.id, hypercorrection_score(omega, c.plain_scores, c.masked_scores, c.label, model));
            break;
        case Strategy::egl:
            for (const auto& c : pool) scores.emplace_back(c.id, egl_score(omega, c.masked_scores, model));
            break;
        case Strategy::egl_shift:
            for (const auto& c : pool)
                scores.emplace_back(c.id, egl_shift_score(omega, c.plain_scores, c.masked_scores, model));
            break;
        case Strategy::dwm: {
            // mean_u cos(x, u) = <x_hat, mean_u u_hat>, so the pool sum is formed once.
            std::vector<double> unit_sum(pool.front().latent.size(), 0.0);
            for (const auto& c : pool) {
                const auto u = l2_normalize(c.latent.values());
                for (std::size_t k = 0; k < unit_sum.size(); ++k) unit_sum[k] += u.v[k];
            }
            const double count = static_cast<double>(pool.size());
            for (const auto& c : pool) {
                const double density = dot(l2_normalize(c.latent.values()).v, unit_sum) / count;
                const double base = egl_score(omega, options.dwm_masked_base ? c.masked_scores : c.plain_scores, model);
                scores.emplace_back(c.id, dwm_score(base, density));
            }
            break;
        }
    }
    return rank_and_select(std::move(scores), pool.size(), std::string(to_string(strategy)), seed);
}

void write_ranking_csv(std::ostream& os, const SelectionRanking& ranking, bool header) {
    if (header) os << "strategy,seed,rank,image_id,score\n";
    char buf[64];
    for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", ranking.entries[r].second);
        os << ranking.strategy << ',' << ranking.seed << ',' << r << ',' << ranking.entries[r].first << ',' << buf
           << '\n';
    }
}

}  // namespace icee::selection
