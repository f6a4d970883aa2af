// Command-line front end: decision-based attacks on JSON victim models with
// pool-based successive halving, plus landscape generation and diagnostics.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bosh/harness.hpp"

namespace {

using namespace bosh;

struct CommonOpts {
    std::string model_path;
    std::string x0_path;
    std::string out_dir = "out";
    std::string attacker = "signopt";
    std::uint64_t seed = 0;
    double epsilon = 1.0;
    int q = 20;
    double probe_radius = 0.01;
    double step_size = 0.2;
    std::string init_mode = "gaussian";
    double lambda0 = 1.0;
    double growth = 2.0;
    double lambda_max = 0.0;  // 0 -> 100 * lambda0
    double tol_rel = 1e-3;
    std::uint64_t per_dir_budget = 40000;
    std::uint64_t baseline_queries = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_model = true) {
    if (needs_model)
        cmd->add_option("--model", o.model_path, "victim model JSON file")->required();
    cmd->add_option("--x0", o.x0_path, "JSON file with the start point(s); landscapes carry their own");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "master RNG seed");
    cmd->add_option("--epsilon", o.epsilon, "success threshold on the final distortion");
    cmd->add_option("--attacker", o.attacker, "signopt | opt | boundary");
    cmd->add_option("--q", o.q, "probe directions per step");
    cmd->add_option("--probe-radius", o.probe_radius, "probe radius relative to the current lambda");
    cmd->add_option("--step-size", o.step_size, "initial step size relative to the current lambda");
    cmd->add_option("--init-mode", o.init_mode, "gaussian | uniform");
    cmd->add_option("--lambda0", o.lambda0, "coarse search start scale");
    cmd->add_option("--growth", o.growth, "coarse search growth factor");
    cmd->add_option("--lambda-max", o.lambda_max, "coarse search ceiling (default 100 * lambda0)");
    cmd->add_option("--tol-rel", o.tol_rel, "bisection tolerance relative to the bracket top");
    cmd->add_option("--per-dir-budget", o.per_dir_budget, "query budget per direction");
    cmd->add_option("--baseline-queries", o.baseline_queries,
                    "baseline query count for the reported query ratio");
}

AttackerKind parse_attacker(const std::string& name) {
    if (name == "signopt") return AttackerKind::sign_opt;
    if (name == "opt") return AttackerKind::opt;
    if (name == "boundary") return AttackerKind::boundary;
    throw std::invalid_argument("unknown attacker '" + name + "' (signopt | opt | boundary)");
}

InitMode parse_init_mode(const std::string& name) {
    if (name == "gaussian") return InitMode::gaussian;
    if (name == "uniform") return InitMode::uniform;
    throw std::invalid_argument("unknown init mode '" + name + "' (gaussian | uniform)");
}

ExperimentSpec build_spec(const CommonOpts& o, AttackMode mode) {
    ExperimentSpec spec;
    spec.model_path = o.model_path;
    spec.x0_path = o.x0_path;
    spec.mode = mode;
    spec.seed = o.seed;
    spec.epsilon = o.epsilon;
    spec.out_dir = o.out_dir;
    spec.attacker.kind = parse_attacker(o.attacker);
    spec.attacker.num_probe_dirs = o.q;
    spec.attacker.probe_radius = o.probe_radius;
    spec.attacker.step_size = o.step_size;
    spec.search.lambda0 = o.lambda0;
    spec.search.growth = o.growth;
    spec.search.lambda_max = o.lambda_max > 0.0 ? o.lambda_max : 100.0 * o.lambda0;
    spec.search.tol_rel = o.tol_rel;
    spec.bosh.init_mode = parse_init_mode(o.init_mode);
    spec.bosh.per_direction_query_budget = o.per_dir_budget;
    if (o.baseline_queries > 0) spec.baseline_queries = o.baseline_queries;
    return spec;
}

void report(const ExperimentResult& result, const std::string& out_dir) {
    emit_outputs(result, out_dir);
    std::cout << summary_to_json(result.metrics);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"pool-based hard-label attack toolkit"};
    app.require_subcommand(1);

    // attack: one trajectory per example.
    CommonOpts atk;
    CLI::App* attack_cmd = app.add_subcommand("attack", "single-start attack");
    add_common(attack_cmd, atk);

    // multi-init: n independent trajectories per example.
    CommonOpts multi;
    int n_inits = 10;
    CLI::App* multi_cmd = app.add_subcommand("multi-init", "independent restarts");
    add_common(multi_cmd, multi);
    multi_cmd->add_option("--n-inits", n_inits, "number of independent starts")->required();

    // bosh: pooled successive halving with resampling.
    CommonOpts bosh_opts;
    int k = 30;
    int m0 = 3500;
    double cut_frac = 0.5;
    double interval_ratio = 1.4;
    int resample_cap = 3;
    int resample_fixed = -1;
    std::uint64_t total_budget = 0;
    CLI::App* bosh_cmd = app.add_subcommand("bosh", "pooled successive-halving attack");
    add_common(bosh_cmd, bosh_opts);
    bosh_cmd->add_option("--k", k, "initial pool size");
    bosh_cmd->add_option("--m0", m0, "steps per configuration in the first stage");
    bosh_cmd->add_option("--cut-frac", cut_frac, "fraction of the pool cut per stage");
    bosh_cmd->add_option("--interval-ratio", interval_ratio, "stage length growth factor");
    bosh_cmd->add_option("--resample-cap", resample_cap, "max resampled configurations per stage");
    bosh_cmd->add_option("--resample-fixed", resample_fixed,
                         "fixed resample count per stage (default: matched to the cut)");
    bosh_cmd->add_option("--total-budget", total_budget,
                         "total query budget (default k * per-direction budget)");

    // landscape gen: synthetic victim generator.
    CLI::App* landscape_cmd = app.add_subcommand("landscape", "synthetic landscape utilities");
    landscape_cmd->require_subcommand(1);
    CLI::App* gen_cmd = landscape_cmd->add_subcommand("gen", "generate a landscape model file");
    std::uint64_t gen_seed = 0;
    int gen_d = 20;
    int gen_basins = 8;
    double dist_min = 4.0, dist_max = 6.0, radius_min = 3.0, radius_max = 3.9;
    std::string gen_out = "landscape.json";
    std::string gen_x0_path;
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--d", gen_d, "dimension");
    gen_cmd->add_option("--num-basins", gen_basins, "number of basins");
    gen_cmd->add_option("--dist-min", dist_min, "min center distance");
    gen_cmd->add_option("--dist-max", dist_max, "max center distance");
    gen_cmd->add_option("--radius-min", radius_min, "min basin radius");
    gen_cmd->add_option("--radius-max", radius_max, "max basin radius");
    gen_cmd->add_option("--x0", gen_x0_path, "JSON file with the reference point (default origin)");
    gen_cmd->add_option("--out", gen_out, "output model file");

    // slice: planar label map around x0.
    CLI::App* slice_cmd = app.add_subcommand("slice", "labels on a plane through x0");
    std::string slice_model, slice_x0, slice_u1, slice_u2;
    int grid_n = 101;
    double extent = 5.0;
    std::string slice_out = "slice.csv";
    slice_cmd->add_option("--model", slice_model, "victim model JSON file")->required();
    slice_cmd->add_option("--x0", slice_x0, "JSON file with the center point; landscapes carry their own");
    slice_cmd->add_option("--u1", slice_u1, "JSON file with the first spanning direction");
    slice_cmd->add_option("--u2", slice_u2, "JSON file with the second spanning direction");
    slice_cmd->add_option("--grid-n", grid_n, "grid points per axis");
    slice_cmd->add_option("--extent", extent, "half-width of the plane in input units");
    slice_cmd->add_option("--out", slice_out, "output CSV file");

    // metrics: recompute a summary from its per-example records.
    CLI::App* metrics_cmd = app.add_subcommand("metrics", "recompute metrics from a summary file");
    std::string metrics_summary;
    double metrics_epsilon = 1.0;
    std::uint64_t metrics_baseline = 0;
    metrics_cmd->add_option("--summary", metrics_summary, "summary.json from a previous run")
        ->required();
    metrics_cmd->add_option("--epsilon", metrics_epsilon, "success threshold");
    metrics_cmd->add_option("--baseline-queries", metrics_baseline, "baseline query count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // flag and argument problems are validation errors
    }

    if (*attack_cmd) {
        report(run_experiment(build_spec(atk, AttackMode::single)), atk.out_dir);
    } else if (*multi_cmd) {
        ExperimentSpec spec = build_spec(multi, AttackMode::multi_init);
        spec.n_inits = n_inits;
        report(run_experiment(spec), multi.out_dir);
    } else if (*bosh_cmd) {
        ExperimentSpec spec = build_spec(bosh_opts, AttackMode::bosh);
        spec.bosh.k = k;
        spec.bosh.m0 = m0;
        spec.bosh.cut_frac = cut_frac;
        spec.bosh.interval_ratio = interval_ratio;
        spec.bosh.resample_cap = resample_cap;
        if (resample_fixed >= 0) {
            spec.bosh.resample_rule = ResampleRule::fixed;
            spec.bosh.resample_fixed = resample_fixed;
        }
        spec.bosh.total_query_budget = total_budget;
        report(run_experiment(spec), bosh_opts.out_dir);
    } else if (*gen_cmd) {
        Vec x0;
        if (!gen_x0_path.empty()) x0 = load_point(gen_x0_path);
        SyntheticLandscape model = gen_landscape(gen_seed, gen_d, gen_basins, {dist_min, dist_max},
                                                 {radius_min, radius_max}, std::move(x0));
        save_landscape(model, gen_out);
        std::cout << "wrote " << gen_out << " (ground_truth " << model.ground_truth() << ")\n";
    } else if (*slice_cmd) {
        std::unique_ptr<VictimModel> model = load_model(slice_model);
        Vec x0;
        if (const auto* landscape = dynamic_cast<const SyntheticLandscape*>(model.get()))
            x0 = landscape->reference_point();
        if (!slice_x0.empty()) x0 = load_point(slice_x0);
        if (x0.empty()) throw std::invalid_argument("slice: this model type needs --x0");
        Vec u1, u2;
        if (!slice_u1.empty()) u1 = load_point(slice_u1);
        if (!slice_u2.empty()) u2 = load_point(slice_u2);
        if (u1.empty()) {  // default: first two coordinate axes
            u1.assign(x0.size(), 0.0);
            u1[0] = 1.0;
        }
        if (u2.empty()) {
            u2.assign(x0.size(), 0.0);
            u2[x0.size() > 1 ? 1 : 0] = 1.0;
        }
        QueryLedger ledger;
        SliceGrid grid = boundary_slice(*model, x0, u1, u2, grid_n, extent, ledger);
        write_slice_csv(grid, slice_out);
        std::cout << "wrote " << slice_out << " (" << ledger.count << " queries)\n";
    } else if (*metrics_cmd) {
        std::ifstream in(metrics_summary);
        if (!in) throw std::runtime_error("cannot open '" + metrics_summary + "'");
        nlohmann::json j;
        in >> j;
        std::vector<double> lambdas;
        std::vector<std::uint64_t> queries;
        for (const auto& e : j.at("per_example")) {
            lambdas.push_back(e.at("lambda").get<double>());
            queries.push_back(e.at("queries").get<std::uint64_t>());
        }
        std::optional<std::uint64_t> baseline;
        if (metrics_baseline > 0) baseline = metrics_baseline;
        std::cout << summary_to_json(compute_metrics(lambdas, queries, metrics_epsilon, baseline));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
