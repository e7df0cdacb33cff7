#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "icee/concepts.hpp"
#include "icee/config.hpp"
#include "icee/eval.hpp"
#include "icee/selection.hpp"
#include "icee/synthdata.hpp"
#include "icee/target_model.hpp"
#include "icee/user_model.hpp"

namespace icee::pipeline {

// Artifact layout under the output directory.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path target() const { return root / "target"; }
    std::filesystem::path concepts() const { return root / "concepts"; }
    std::filesystem::path user(synth::UserKind kind) const;
    std::filesystem::path rankings() const { return root / "rankings"; }
    std::filesystem::path sweep() const { return root / "sweep"; }
    std::filesystem::path matched() const { return root / "matched_mismatched"; }
};

// Seed of each stage, derived from the master seed.
std::uint64_t stage_seed(std::uint64_t master, const char* stage);
std::uint64_t user_seed(std::uint64_t master, synth::UserKind kind);

// Each stage loads its inputs from disk (ArtifactMissing if absent) and
// writes its outputs.
synth::DatasetSplit gen_data(const ExperimentConfig& config);
target::TrainedTarget train_target(const ExperimentConfig& config);
concepts::ConceptModel discover_concepts(const ExperimentConfig& config);
user::ExpertiseVector fit_user(const ExperimentConfig& config, synth::UserKind kind);
std::vector<selection::SelectionRanking> select(const ExperimentConfig& config);
std::vector<eval::CurvePoint> sweep(const ExperimentConfig& config);
eval::MatchedMismatched matched_mismatched(const ExperimentConfig& config);
// Rebuilds the SVG charts from the CSV files already on disk.
void report(const ExperimentConfig& config);

// In-memory state shared by the selection and evaluation stages.
struct Workspace {
    synth::DatasetSplit split;
    target::TrainedTarget target;
    concepts::ConceptModel concepts;
    selection::CandidatePool pool;
    eval::TestSet test;

    eval::SweepInputs inputs() const { return {&concepts, &pool, &test}; }
};

Workspace load_workspace(const ExperimentConfig& config);

// Every stage in order, entirely in memory; nothing is written.
struct RunResult {
    Workspace ws;
    user::ExpertiseVector color_user;
    user::ExpertiseVector shape_user;
    std::vector<eval::CurvePoint> sweep;
    eval::MatchedMismatched matched;
};

struct RunOptions {
    bool sweep = true;
    bool matched = true;
};

RunResult run_in_memory(const ExperimentConfig& config, const RunOptions& options = {});

user::ExpertiseVector fit_user_in(const Workspace& ws, const ExperimentConfig& config, synth::UserKind kind);

}  // namespace icee::pipeline
