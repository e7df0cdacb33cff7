#include "icee/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "icee/checkpoint.hpp"
#include "icee/report.hpp"

namespace icee::pipeline {

std::filesystem::path Layout::user(synth::UserKind kind) const {
    return root / "users" / std::string(synth::to_string(kind));
}

std::uint64_t stage_seed(std::uint64_t master, const char* stage) { return RngStream(master).substream(stage).key(); }

std::uint64_t user_seed(std::uint64_t master, synth::UserKind kind) {
    return RngStream(master).substream("user", kind == synth::UserKind::color_user ? 0 : 1).key();
}

namespace {

void write_config_copy(const ExperimentConfig& config) {
    auto doc = config_to_json(config);
    doc.erase("out");
    write_text_file(config.out_dir / "config.json", doc.dump(2) + "\n");
}

synth::DatasetSplit make_split(const ExperimentConfig& config) {
    return synth::generate_dataset(stage_seed(config.seed, "data"), config.n_per_class);
}

target::TrainedTarget make_target(const synth::DatasetSplit& split, const ExperimentConfig& config) {
    return target::train_target(split, config.target, stage_seed(config.seed, "target"));
}

concepts::ConceptModel make_concepts(const synth::DatasetSplit& split, const target::TrainedTarget& target,
                                     const ExperimentConfig& config) {
    return concepts::discover_concepts(split, target.params, config.concepts, stage_seed(config.seed, "concepts"));
}

void finish_workspace(Workspace& ws, const ExperimentConfig& config) {
    ws.pool = selection::build_pool(ws.split.train, ws.target.params, ws.concepts, config.saliency_norm);
    ws.test = eval::make_test_set(ws.split.test, ws.target.params, ws.concepts);
}

std::vector<eval::CurvePoint> read_csv_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ArtifactMissing("missing " + path.string());
    return report::read_results_csv(is);
}

std::vector<eval::CurvePoint> joined(const eval::MatchedMismatched& mm) {
    std::vector<eval::CurvePoint> all = mm.matched;
    all.insert(all.end(), mm.mismatched.begin(), mm.mismatched.end());
    return all;
}

}  // namespace

synth::DatasetSplit gen_data(const ExperimentConfig& config) {
    auto split = make_split(config);
    synth::save_dataset(Layout{config.out_dir}.data(), split);
    write_config_copy(config);
    return split;
}

target::TrainedTarget train_target(const ExperimentConfig& config) {
    const auto split = synth::load_dataset(Layout{config.out_dir}.data());
    auto model = make_target(split, config);
    target::save_target(Layout{config.out_dir}.target(), model);
    return model;
}

concepts::ConceptModel discover_concepts(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    const auto split = synth::load_dataset(layout.data());
    const auto target = target::load_target(layout.target());
    auto model = make_concepts(split, target, config);
    concepts::save_concepts(layout.concepts(), model);
    return model;
}

Workspace load_workspace(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    Workspace ws;
    ws.split = synth::load_dataset(layout.data());
    ws.target = target::load_target(layout.target());
    ws.concepts = concepts::load_concepts(layout.concepts());
    finish_workspace(ws, config);
    return ws;
}

user::ExpertiseVector fit_user_in(const Workspace& ws, const ExperimentConfig& config, synth::UserKind kind) {
    const auto annotations = user::simulate_annotations(ws.split, kind);
    return eval::fit_user_on_pool(ws.inputs(), annotations, kind, config.user, user_seed(config.seed, kind));
}

user::ExpertiseVector fit_user(const ExperimentConfig& config, synth::UserKind kind) {
    const Layout layout{config.out_dir};
    Workspace ws;
    ws.split = synth::load_dataset(layout.data());
    ws.target = target::load_target(layout.target());
    ws.concepts = concepts::load_concepts(layout.concepts());
    const auto annotations = user::simulate_annotations(ws.split, kind);
    auto u = user::fit_expertise(ws.split, annotations, kind, ws.target.params, ws.concepts, config.user,
                                 user_seed(config.seed, kind));
    user::save_user(layout.user(kind), u);
    return u;
}

std::vector<selection::SelectionRanking> select(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    const auto ws = load_workspace(config);
    const auto user = user::load_user(layout.user(config.sweep_user));
    const auto annotations = user::simulate_annotations(ws.split, config.sweep_user);
    std::vector<selection::SelectionRanking> out;
    for (auto strategy : config.strategies) {
        out.push_back(selection::rank_pool(strategy, ws.pool, user, annotations, ws.concepts, config.seed,
                                           config.strategy_options()));
        std::ostringstream os;
        selection::write_ranking_csv(os, out.back());
        write_text_file(layout.rankings() / (std::string(selection::to_string(strategy)) + ".csv"), os.str());
    }
    return out;
}

std::vector<eval::CurvePoint> sweep(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    const auto ws = load_workspace(config);
    const auto user = user::load_user(layout.user(config.sweep_user));
    const auto annotations = user::simulate_annotations(ws.split, config.sweep_user);
    auto curves = eval::run_sweep(ws.inputs(), user, annotations, config);
    report::emit_report(curves, layout.sweep(), "simulatability by strategy");
    return curves;
}

eval::MatchedMismatched matched_mismatched(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    const auto ws = load_workspace(config);
    const auto a = user::load_user(layout.user(synth::UserKind::color_user));
    const auto b = user::load_user(layout.user(synth::UserKind::shape_user));
    auto mm = eval::matched_mismatched(ws.inputs(), a, b, config);
    report::emit_report(joined(mm), layout.matched(), "matched vs mismatched examples");
    return mm;
}

void report(const ExperimentConfig& config) {
    const Layout layout{config.out_dir};
    bool any = false;
    for (const auto& [dir, title] : {std::pair{layout.sweep(), "simulatability by strategy"},
                                     std::pair{layout.matched(), "matched vs mismatched examples"}}) {
        if (!std::filesystem::exists(dir / "results.csv")) continue;
        const auto curves = read_csv_file(dir / "results.csv");
        write_text_file(dir / "curves.svg", report::render_svg(curves, title));
        any = true;
    }
    if (!any) throw ArtifactMissing("no results.csv under " + layout.sweep().string() + " or " +
                                    layout.matched().string());
}

RunResult run_in_memory(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    RunResult r;
    r.ws.split = make_split(config);
    r.ws.target = make_target(r.ws.split, config);
    r.ws.concepts = make_concepts(r.ws.split, r.ws.target, config);
    finish_workspace(r.ws, config);
    r.color_user = fit_user_in(r.ws, config, synth::UserKind::color_user);
    r.shape_user = fit_user_in(r.ws, config, synth::UserKind::shape_user);
    if (options.sweep) {
        const auto& u = config.sweep_user == synth::UserKind::color_user ? r.color_user : r.shape_user;
        r.sweep = eval::run_sweep(r.ws.inputs(), u, user::simulate_annotations(r.ws.split, config.sweep_user), config);
    }
    if (options.matched) r.matched = eval::matched_mismatched(r.ws.inputs(), r.color_user, r.shape_user, config);
    return r;
}

}  // namespace icee::pipeline
