// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance --work DIR [--seeds N]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradient_checks.hpp"
#include "icee/config.hpp"
#include "icee/explain.hpp"
#include "icee/pipeline.hpp"
#include "icee/selection.hpp"
#include "oracles.hpp"

using namespace icee;

namespace {

constexpr double kTargetAccuracy = 0.99;
constexpr double kTrainSeconds = 600.0;
constexpr double kFidelity = 0.95;
constexpr std::size_t kSeedsNeeded = 4;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kQuadratureTolerance = 1e-6;
constexpr double kPsiTolerance = 0.05;
constexpr double kWhiteningTolerance = 0.1;
constexpr double kSaliencyTolerance = 1e-12;
const std::vector<double> kLateBudgets{0.20, 0.25, 0.30};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Lines are collected and printed in criterion order at the end.
struct Report {
    int failures = 0;
    std::map<int, std::string> lines;

    void line(int id, bool ok, const std::string& name, const std::string& detail) {
        char head[64];
        std::snprintf(head, sizeof head, "criterion %2d: %s  ", id, ok ? "PASS" : "FAIL");
        lines[id] = head + name + " | " + detail;
        failures += !ok;
    }
    void print() const {
        for (const auto& [id, text] : lines) std::printf("%s\n", text.c_str());
        std::printf("%d of %zu criteria failed\n", failures, lines.size());
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Indices of the four largest entries; ties go to the lower index.
std::vector<std::size_t> top4(const Tensor& omega) {
    std::vector<std::size_t> idx(omega.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return omega[a] > omega[b]; });
    idx.resize(4);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double mean_at(const std::vector<eval::CurvePoint>& curves, const std::string& strategy, double p) {
    for (const auto& c : curves)
        if (c.strategy == strategy && c.p == p) return c.mean_acc;
    throw InvalidInput("no curve point for " + strategy);
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_bytes(e.path());
    return out;
}

struct SeedResult {
    std::uint64_t seed = 0;
    double target_accuracy = 0.0;
    double train_seconds = 0.0;
    double fidelity = 0.0;
    bool identity_exact = true;
    bool identity_mask_zero = true;
    std::vector<std::size_t> color_top, shape_top;
    bool matched_wins = false;
    std::vector<eval::CurvePoint> sweep;
    eval::MatchedMismatched matched;
};

// Criterion 3 and the identity-mask half of criterion 9 on every image.
void check_identities(const pipeline::Workspace& ws, const Tensor& fitted_omega, SeedResult& r) {
    const Tensor ones({ws.concepts.bank.count()}, 1.0);
    const Tensor full_mask({synth::kCanvas, synth::kCanvas}, 1.0);
    for (const auto* part : {&ws.split.train, &ws.split.test})
        for (const auto& img : *part) {
            const auto direct = softmax(concepts::conceptized_forward(img.pixels, ws.target.params, ws.concepts).values());
            if (user::user_predict_dist(ones, img.pixels, ws.target.params, ws.concepts) != direct)
                r.identity_exact = false;
            const std::size_t y = target::predict(ws.target.params, img.pixels);
            for (const Tensor* omega : {&ones, &fitted_omega})
                if (selection::hypercorrection_score(*omega, img.pixels, full_mask, y, ws.target.params, ws.concepts) !=
                    0.0)
                    r.identity_mask_zero = false;
        }
}

void finish(SeedResult& r, const pipeline::Workspace& ws, const user::ExpertiseVector& color,
            const user::ExpertiseVector& shape) {
    r.target_accuracy = ws.target.test_accuracy;
    r.fidelity = ws.concepts.fidelity;
    r.color_top = top4(color.omega);
    r.shape_top = top4(shape.omega);
    r.matched_wins = true;
    for (double p : kLateBudgets)
        if (!(mean_at(r.matched.matched, "matched", p) > mean_at(r.matched.mismatched, "mismatched", p)))
            r.matched_wins = false;
    check_identities(ws, color.omega, r);
}

// Every CLI stage in order, on disk.
SeedResult run_on_disk(const ExperimentConfig& config) {
    SeedResult r;
    r.seed = config.seed;
    pipeline::gen_data(config);
    const auto t0 = std::chrono::steady_clock::now();
    pipeline::train_target(config);
    r.train_seconds = seconds_since(t0);
    pipeline::discover_concepts(config);
    const auto color = pipeline::fit_user(config, synth::UserKind::color_user);
    const auto shape = pipeline::fit_user(config, synth::UserKind::shape_user);
    pipeline::select(config);
    r.sweep = pipeline::sweep(config);
    r.matched = pipeline::matched_mismatched(config);
    pipeline::report(config);
    finish(r, pipeline::load_workspace(config), color, shape);
    return r;
}

SeedResult run_in_memory(const ExperimentConfig& config) {
    SeedResult r;
    r.seed = config.seed;
    auto run = pipeline::run_in_memory(config, {false, true});
    r.matched = run.matched;
    finish(r, run.ws, run.color_user, run.shape_user);
    return r;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "}";
}

// Hand-built single-channel linear model: logit = w * mean(A).
double analytic_gradcam_error() {
    RngStream rng(31);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        Tensor a({1, 4, 4});
        for (double& v : a.values()) v = rng.normal();
        const double w = rng.uniform(0.1, 3.0);
        const auto s = explain::gradcam_from_maps(a, Tensor({1, 4, 4}, w / 16.0), 4, 4);
        double hi = 0.0;
        for (double v : a.values()) hi = std::max(hi, v);
        for (std::size_t i = 0; i < 16; ++i) worst = std::max(worst, std::abs(s.map[i] - std::max(a[i], 0.0) / hi));
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work";
    std::size_t seeds = 5;
    app.add_option("--work", work, "Scratch directory for pipeline artifacts");
    app.add_option("--seeds", seeds, "Number of master seeds")->check(CLI::Range(1, 50));
    CLI11_PARSE(app, argc, argv);

    const std::filesystem::path root(work);
    std::filesystem::remove_all(root);
    Report rep;

    // Criteria 7 and 8 do not depend on the pipeline.
    {
        const auto t0 = std::chrono::steady_clock::now();
        const auto results = gradcheck::run_all();
        const double elapsed = seconds_since(t0);
        bool ok = elapsed < kGradSeconds;
        std::string detail;
        for (const auto& r : results) {
            ok = ok && r.worst < kGradTolerance && r.instances >= 100;
            detail += r.name + " " + fmt("%.1e", r.worst) + "; ";
        }
        rep.line(7, ok, "gradient suite", detail + fmt("%.1fs", elapsed));
    }
    {
        const double quad = oracle::quadrature_max_error();
        const auto [x, labels] = oracle::two_class_line(1, 10000);
        const auto line = plda::plda_fit(x, labels);
        const double line_err = std::abs(line.psi[0] - 4.0) / 4.0;
        const auto data = oracle::synthetic_plda(2);
        const auto model = plda::plda_fit(data.latents, data.labels);
        const double psi_err = oracle::psi_recovery_error(model, data.psi);
        const double white = oracle::whitening_deviation(model, data.latents, data.labels);
        rep.line(8,
                 quad < kQuadratureTolerance && line_err < kPsiTolerance && psi_err < kPsiTolerance &&
                     white < kWhiteningTolerance,
                 "PLDA oracles",
                 "quadrature " + fmt("%.1e", quad) + ", 1-D psi " + fmt("%.4f", line.psi[0]) + " (rel " +
                     fmt("%.4f", line_err) + "), 64-D psi rel " + fmt("%.4f", psi_err) + ", whitening " +
                     fmt("%.2e", white));
    }

    // Seed 1 runs every stage on disk twice; the other seeds run in memory.
    std::vector<SeedResult> results;
    ExperimentConfig base;
    base.out_dir = root / "seed1_a";
    std::printf("seed 1: on-disk pipeline (first pass)\n");
    std::fflush(stdout);
    results.push_back(run_on_disk(base));
    ExperimentConfig again = base;
    again.out_dir = root / "seed1_b";
    std::printf("seed 1: on-disk pipeline (second pass)\n");
    std::fflush(stdout);
    run_on_disk(again);
    for (std::uint64_t s = 2; s <= seeds; ++s) {
        ExperimentConfig c;
        c.seed = s;
        std::printf("seed %llu: in-memory pipeline\n", static_cast<unsigned long long>(s));
        std::fflush(stdout);
        results.push_back(run_in_memory(c));
    }
    for (const auto& r : results)
        std::printf("  seed %llu: target %.4f, fidelity %.4f, top4 color %s shape %s, matched>mismatched %s\n",
                    static_cast<unsigned long long>(r.seed), r.target_accuracy, r.fidelity, join(r.color_top).c_str(),
                    join(r.shape_top).c_str(), r.matched_wins ? "yes" : "no");

    {
        bool ok = true;
        double lo = 1.0;
        for (const auto& r : results) {
            ok = ok && r.target_accuracy >= kTargetAccuracy;
            lo = std::min(lo, r.target_accuracy);
        }
        const double train_time = results.front().train_seconds;
        ok = ok && train_time < kTrainSeconds;
        rep.line(1, ok, "target accuracy",
                 "min " + fmt("%.4f", lo) + " over " + std::to_string(results.size()) + " seeds, training " +
                     fmt("%.1fs", train_time));
    }
    {
        bool ok = true;
        double lo = 1.0;
        for (const auto& r : results) {
            ok = ok && r.fidelity >= kFidelity;
            lo = std::min(lo, r.fidelity);
        }
        rep.line(2, ok, "concept fidelity (m=8)", "min " + fmt("%.4f", lo));
    }
    {
        const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.identity_exact; });
        rep.line(3, ok, "identity scaling exactness", ok ? "bit-identical on every image" : "mismatch found");
    }
    const std::size_t needed = std::min(kSeedsNeeded, results.size());
    {
        std::size_t disjoint = 0;
        for (const auto& r : results) {
            std::vector<std::size_t> common;
            std::set_intersection(r.color_top.begin(), r.color_top.end(), r.shape_top.begin(), r.shape_top.end(),
                                  std::back_inserter(common));
            disjoint += common.empty();
        }
        rep.line(4, disjoint >= needed, "complementary expertise",
                 std::to_string(disjoint) + " of " + std::to_string(results.size()) + " seeds disjoint");
    }
    {
        std::size_t wins = 0;
        std::string detail;
        for (const auto& r : results) {
            wins += r.matched_wins;
            for (double p : kLateBudgets)
                detail += fmt("%.2f:", p) + fmt("%.3f/", mean_at(r.matched.matched, "matched", p)) +
                          fmt("%.3f ", mean_at(r.matched.mismatched, "mismatched", p));
            detail += "; ";
        }
        rep.line(5, wins >= needed, "matched > mismatched",
                 std::to_string(wins) + " of " + std::to_string(results.size()) + " seeds; " + detail);
    }
    {
        const auto& sweep = results.front().sweep;
        bool ok = true;
        std::string detail;
        for (double p : kLateBudgets) {
            const double h = mean_at(sweep, "hypercorrection", p), r = mean_at(sweep, "random", p);
            ok = ok && h >= r;
            detail += fmt("p=%.2f ", p) + fmt("%.4f vs ", h) + fmt("%.4f; ", r);
        }
        rep.line(6, ok, "hypercorrection >= random", detail);
    }
    {
        const double err = analytic_gradcam_error();
        const bool mask_zero =
            std::all_of(results.begin(), results.end(), [](const auto& r) { return r.identity_mask_zero; });
        rep.line(9, err <= kSaliencyTolerance && mask_zero, "GradCAM analytic check",
                 "max error " + fmt("%.1e", err) + ", identity-mask score " + (mask_zero ? "0 on every image" : "nonzero"));
    }
    {
        const auto a = tree(base.out_dir), b = tree(again.out_dir);
        std::size_t differing = 0;
        for (const auto& [name, bytes] : a) {
            auto it = b.find(name);
            if (it == b.end() || it->second != bytes) ++differing;
        }
        const bool ok = a.size() == b.size() && differing == 0 && a.contains("sweep/results.csv") &&
                        a.contains("target/checkpoint.json");
        rep.line(10, ok, "determinism",
                 std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ");
    }

    rep.print();
    return rep.failures == 0 ? 0 : 1;
}
