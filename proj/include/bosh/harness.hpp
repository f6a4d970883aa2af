#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bosh/bosh.hpp"

namespace bosh {

enum class AttackMode { single, multi_init, bosh };

struct ExperimentSpec {
    std::string model_path;
    std::string x0_path;  // ignored for landscape models
    AttackMode mode = AttackMode::single;
    int n_inits = 1;      // multi_init only
    BoshConfig bosh;
    AttackerConfig attacker;  // template; per-run RNG streams are derived
    DistortionParams search;
    double epsilon = 1.0;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> baseline_queries;
    std::string out_dir = "out";
};

struct PerExample {
    double lambda = 0.0;
    std::uint64_t queries = 0;
};

struct MetricsSummary {
    double avg_l2 = 0.0;
    double asr = 0.0;  // fraction with lambda strictly below epsilon
    double epsilon = 0.0;
    std::uint64_t total_queries = 0;
    std::optional<double> query_ratio;  // total / baseline when a baseline is given
    std::vector<PerExample> per_example;
};

MetricsSummary compute_metrics(const std::vector<double>& lambdas,
                               const std::vector<std::uint64_t>& queries, double epsilon,
                               std::optional<std::uint64_t> baseline_queries = {});

struct ExampleOutcome {
    BoshResult run;       // best run for multi_init
    double final_lambda = 0.0;
    std::uint64_t queries = 0;  // summed over inits for multi_init
};

struct ExperimentResult {
    std::vector<ExampleOutcome> examples;
    MetricsSummary metrics;
};

// n_inits independent full-budget runs per example; keeps the minimum lambda
// and the summed query count.
ExampleOutcome attack_multi_init(const AttackerConfig& ac_template, std::uint64_t seed,
                                 std::uint64_t query_budget, InitMode init_mode, int n_inits,
                                 AttackEnv& env);

struct SliceGrid {
    int n = 0;
    double extent = 0.0;
    std::vector<int> labels;  // row-major, labels[i * n + j]
    int at(int i, int j) const { return labels[static_cast<std::size_t>(i) * n + j]; }
};

// Labels on a uniform (2*extent / (grid_n - 1))-spaced grid in the plane
// spanned by u1 and the u1-orthogonalized u2, centered on x0. Costs exactly
// grid_n^2 queries. Near-parallel spanning directions are an input error.
SliceGrid boundary_slice(const VictimModel& model, const Vec& x0, const Vec& u1, const Vec& u2,
                         int grid_n, double extent, QueryLedger& ledger);

// Writes trace_<i>.csv and curve_<i>.svg per example plus one summary.json.
// Re-emitting the same result yields byte-identical files.
void emit_outputs(const ExperimentResult& result, const std::string& out_dir);

void write_trace_csv(const BoshResult& run, const std::string& path);
void write_curve_svg(const BoshResult& run, const std::string& path);
void write_summary_json(const MetricsSummary& metrics, const std::string& path);
void write_slice_csv(const SliceGrid& grid, const std::string& path);

std::string summary_to_json(const MetricsSummary& metrics);

// Loads the model, resolves the example list (a landscape supplies its own
// reference point; other models read vectors from x0_path), runs the chosen
// mode per example, and computes metrics.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// x0 file: one vector or a list of vectors.
std::vector<Vec> load_points(const std::string& path);
Vec load_point(const std::string& path);

}  // namespace bosh
