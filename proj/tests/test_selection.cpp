#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "icee/explain.hpp"
#include "icee/gradcheck.hpp"
#include "icee/ops.hpp"
#include "icee/selection.hpp"
#include "icee/user_model.hpp"

using namespace icee;
using namespace icee::selection;

namespace {

struct Fixture {
    synth::DatasetSplit split = synth::generate_dataset(3, 5);
    target::ConvNetParams target = testutil::random_target(3);
    concepts::ConceptModel model = testutil::random_concept_model(3);
    CandidatePool pool = build_pool(split.train, target, model);
    user::ExpertiseVector user;

    Fixture() {
        user.omega = Tensor::vector({1.0, 0.2, 0.9, 0.0, 0.5, 1.0, 0.3, 0.7});
        user.user = synth::UserKind::color_user;
    }
};

Tensor random_scores(RngStream& r, std::size_t m = 8) {
    Tensor s({m, target::kPositions});
    for (double& v : s.values()) v = r.uniform(-1.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("strategy names") {
    for (auto s : kAllStrategies) CHECK(parse_strategy(to_string(s)) == s);
    CHECK(to_string(Strategy::egl_shift) == "egl_shift");
    CHECK_THROWS_AS(parse_strategy("greedy"), InvalidInput);
}

TEST_CASE("pool candidates explain the target prediction") {
    Fixture f;
    REQUIRE(f.pool.size() == f.split.train.size());
    for (std::size_t i = 0; i < f.pool.size(); ++i) {
        const auto& c = f.pool[i];
        CHECK(c.id == f.split.train[i].id);
        CHECK(c.label == target::predict(f.target, *c.image));
        CHECK(c.saliency.explained_class == c.label);
        CHECK(c.plain_scores == user::image_scores(*c.image, f.target, f.model));
        CHECK(c.masked_scores ==
              user::image_scores(explain::apply_mask(*c.image, c.saliency.map), f.target, f.model));
        CHECK(c.latent == latent_feature(f.target, *c.image));
    }
}

TEST_CASE("hypercorrection") {
    Fixture f;
    const Tensor ones({32, 32}, 1.0);
    for (const auto& c : f.pool) {
        CHECK(hypercorrection_score(f.user.omega, *c.image, ones, c.label, f.target, f.model) == 0.0);
        CHECK(hypercorrection_score(f.user.omega, c.plain_scores, c.plain_scores, c.label, f.model) == 0.0);
        const double direct = hypercorrection_score(f.user.omega, *c.image, c.saliency.map, c.label, f.target, f.model);
        CHECK(direct == hypercorrection_score(f.user.omega, c.plain_scores, c.masked_scores, c.label, f.model));
        const auto plain = user::user_dist_from_scores(f.user.omega, c.plain_scores, f.model);
        const auto masked = user::user_dist_from_scores(f.user.omega, c.masked_scores, f.model);
        CHECK(direct == plain[c.label] - masked[c.label]);
        CHECK(direct <= plain[c.label]);
        CHECK(direct >= -1.0);
    }
}

TEST_CASE("expected gradient length") {
    const auto model = testutil::random_concept_model(5);
    RngStream r(6);
    for (int k = 0; k < 10; ++k) {
        const Tensor s = random_scores(r);
        Tensor omega({8});
        for (double& v : omega.values()) v = r.uniform();
        // Oracle from finite-difference gradients.
        const auto probs = user::user_dist_from_scores(omega, s, model);
        double expect = 0.0;
        for (std::size_t y = 0; y < 4; ++y) {
            const Tensor fd = finite_difference(
                [&](const Tensor& w) { return user::omega_loss_and_grad(w, s, y, model).loss; }, omega);
            expect += probs[y] * std::sqrt(dot(fd.values(), fd.values()));
        }
        const double egl = egl_score(omega, s, model);
        CHECK(egl >= 0.0);
        CHECK(egl == doctest::Approx(expect).epsilon(1e-6));

        const Tensor s2 = random_scores(r);
        CHECK(egl_shift_score(omega, s, s2, model) == egl_score(omega, s2, model) - egl);
        CHECK(egl_shift_score(omega, s, s, model) == 0.0);
    }
}

TEST_CASE("density weighting") {
    const std::vector<Tensor> pool{Tensor::vector({1, 0}), Tensor::vector({0, 2}), Tensor::vector({0, 0}),
                                   Tensor::vector({-3, 0})};
    // cos with [1,0]: 1, 0, 0 (zero vector), -1
    CHECK(density_factor(Tensor::vector({2, 0}), pool) == 0.0);
    CHECK(density_factor(Tensor::vector({0, 1}), pool) == doctest::Approx(0.25));
    CHECK(density_factor(Tensor::vector({0, 0}), pool) == 0.0);
    CHECK_THROWS_AS(density_factor(Tensor::vector({1, 0}), std::span<const Tensor>{}), InvalidInput);
    CHECK(dwm_score(2.0, 0.5) == 1.0);
    CHECK(dwm_score(2.0, 0.5, 2.0) == 0.5);

    Fixture f;
    std::vector<Tensor> latents;
    for (const auto& c : f.pool) latents.push_back(c.latent);
    for (const auto& c : f.pool) {
        const double egl = egl_score(f.user.omega, c.masked_scores, f.model);
        const double dwm = dwm_score(egl, density_factor(c.latent, latents));
        CHECK(dwm <= egl + 1e-15);
        CHECK(dwm >= -egl - 1e-15);
    }
}

TEST_CASE("rank and select") {
    std::vector<std::pair<std::uint64_t, double>> s{{5, 0.1}, {2, 0.9}, {9, 0.5}, {1, 0.5}, {4, -1.0}};
    const auto all = rank_and_select(s, 5, "x");
    CHECK(all.ids() == std::vector<std::uint64_t>{2, 1, 9, 5, 4});
    const auto top = rank_and_select(s, 2);
    CHECK(top.ids() == std::vector<std::uint64_t>{2, 1});
    CHECK(rank_and_select(s, 0).entries.empty());
    CHECK_THROWS_AS(rank_and_select(s, 6), InvalidInput);

    // Top k followed by the ranked remainder reproduces the full ranking.
    RngStream r(2);
    std::vector<std::pair<std::uint64_t, double>> big;
    for (std::uint64_t i = 0; i < 200; ++i) big.emplace_back(i, std::floor(r.uniform(0, 20)));
    const auto full = rank_and_select(big, big.size()).ids();
    for (std::size_t k : {0u, 1u, 50u, 199u, 200u}) {
        auto head = rank_and_select(big, k).ids();
        std::set<std::uint64_t> taken(head.begin(), head.end());
        std::vector<std::pair<std::uint64_t, double>> rest;
        for (const auto& e : big)
            if (!taken.contains(e.first)) rest.push_back(e);
        const auto tail = rank_and_select(rest, rest.size()).ids();
        head.insert(head.end(), tail.begin(), tail.end());
        CHECK(head == full);
    }
}

TEST_CASE("random selection") {
    std::vector<std::uint64_t> ids(100);
    for (std::uint64_t i = 0; i < 100; ++i) ids[i] = 1000 + i;
    RngStream a(5), b(5), c(6);
    const auto ra = random_select(a, ids, 30);
    CHECK(ra.entries.size() == 30);
    CHECK(ra.ids() == random_select(b, ids, 30).ids());
    CHECK(ra.ids() != random_select(c, ids, 30).ids());
    const auto chosen = ra.ids();
    CHECK(std::set<std::uint64_t>(chosen.begin(), chosen.end()).size() == 30);
    for (auto id : chosen) CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
    for (std::size_t i = 0; i < 30; ++i) CHECK(ra.entries[i].second == static_cast<double>(30 - i));
    RngStream d(1);
    CHECK_THROWS_AS(random_select(d, ids, 101), InvalidInput);

    // Every id is drawn first about equally often.
    std::vector<int> first(10, 0);
    std::vector<std::uint64_t> small{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    RngStream e(7);
    for (int t = 0; t < 5000; ++t) ++first[random_select(e, small, 1).ids()[0]];
    for (int n : first) CHECK(std::abs(n - 500) < 100);
}

TEST_CASE("rank pool") {
    Fixture f;
    const auto ann = user::simulate_annotations(f.split, f.user.user);
    for (auto s : kAllStrategies) {
        const auto ranking = rank_pool(s, f.pool, f.user, ann, f.model, 42);
        CHECK(ranking.entries.size() == f.pool.size());
        CHECK(ranking.strategy == to_string(s));
        const auto ids = ranking.ids();
        CHECK(std::set<std::uint64_t>(ids.begin(), ids.end()).size() == f.pool.size());
        CHECK(rank_pool(s, f.pool, f.user, ann, f.model, 42).entries == ranking.entries);
    }
    CHECK(rank_pool(Strategy::random, f.pool, f.user, ann, f.model, 1).ids() !=
          rank_pool(Strategy::random, f.pool, f.user, ann, f.model, 2).ids());
    CHECK(rank_pool(Strategy::egl, f.pool, f.user, ann, f.model, 1).entries ==
          rank_pool(Strategy::egl, f.pool, f.user, ann, f.model, 2).entries);

    const auto hyper = rank_pool(Strategy::hypercorrection, f.pool, f.user, ann, f.model, 0);
    for (std::size_t i = 1; i < hyper.entries.size(); ++i) CHECK(hyper.entries[i - 1].second >= hyper.entries[i].second);

    // The DWM fast path agrees with the per-candidate density factor.
    std::vector<Tensor> latents;
    for (const auto& c : f.pool) latents.push_back(c.latent);
    const auto dwm = rank_pool(Strategy::dwm, f.pool, f.user, ann, f.model, 0);
    for (const auto& [id, score] : dwm.entries) {
        const auto& c = *std::find_if(f.pool.begin(), f.pool.end(), [&](const Candidate& x) { return x.id == id; });
        const double expect = dwm_score(egl_score(f.user.omega, c.masked_scores, f.model), density_factor(c.latent, latents));
        CHECK(score == doctest::Approx(expect).epsilon(1e-12));
    }

    const auto exemplar = rank_pool(Strategy::bt, f.pool, f.user, ann, f.model, 3, {true, true});
    CHECK(exemplar.entries.size() == f.pool.size());
    CHECK_THROWS_AS(rank_pool(Strategy::egl, CandidatePool{}, f.user, ann, f.model, 0), InvalidInput);
}

TEST_CASE("ranking csv") {
    SelectionRanking r{"egl", 7, {{12, 0.1}, {3, -2.5}}};
    std::ostringstream os;
    write_ranking_csv(os, r);
    CHECK(os.str() == "strategy,seed,rank,image_id,score\negl,7,0,12,0.10000000000000001\negl,7,1,3,-2.5\n");
}
