#include "bosh/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace bosh {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

const char* origin_name(Origin o) { return o == Origin::initial ? "initial" : "resampled"; }

Origin origin_of(const BoshResult& run, int config_id) {
    if (config_id >= 0 && config_id < static_cast<int>(run.origin_by_config.size()))
        return run.origin_by_config[static_cast<std::size_t>(config_id)];
    return Origin::initial;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

MetricsSummary compute_metrics(const std::vector<double>& lambdas,
                               const std::vector<std::uint64_t>& queries, double epsilon,
                               std::optional<std::uint64_t> baseline_queries) {
    if (lambdas.empty()) throw std::invalid_argument("compute_metrics: no examples");
    if (lambdas.size() != queries.size())
        throw std::invalid_argument("compute_metrics: lambdas and queries must align");
    if (!(epsilon > 0.0)) throw std::invalid_argument("compute_metrics: epsilon must be positive");
    MetricsSummary m;
    m.epsilon = epsilon;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0)
            throw std::invalid_argument("compute_metrics: lambdas must be finite and non-negative");
        sum += lambdas[i];
        if (lambdas[i] < epsilon) ++hits;
        m.total_queries += queries[i];
        m.per_example.push_back(PerExample{lambdas[i], queries[i]});
    }
    m.avg_l2 = sum / static_cast<double>(lambdas.size());
    m.asr = static_cast<double>(hits) / static_cast<double>(lambdas.size());
    if (baseline_queries) {
        if (*baseline_queries == 0)
            throw std::invalid_argument("compute_metrics: baseline query count must be positive");
        m.query_ratio = static_cast<double>(m.total_queries) / static_cast<double>(*baseline_queries);
    }
    return m;
}

ExampleOutcome attack_multi_init(const AttackerConfig& ac_template, std::uint64_t seed,
                                 std::uint64_t query_budget, InitMode init_mode, int n_inits,
                                 AttackEnv& env) {
    if (n_inits < 1) throw std::invalid_argument("attack_multi_init: n_inits must be positive");
    ExampleOutcome out;
    bool has = false;
    for (int i = 0; i < n_inits; ++i) {
        BoshResult run = run_single_attack(ac_template, mix_seed(seed, 0x6d690000ULL + i),
                                           query_budget, init_mode, env);
        out.queries += run.total_queries;
        if (!has || run.best.lambda < out.final_lambda) {
            out.final_lambda = run.best.lambda;
            out.run = std::move(run);
            has = true;
        }
    }
    return out;
}

SliceGrid boundary_slice(const VictimModel& model, const Vec& x0, const Vec& u1, const Vec& u2,
                         int grid_n, double extent, QueryLedger& ledger) {
    if (static_cast<int>(x0.size()) != model.dim())
        throw std::invalid_argument("boundary_slice: x0 does not match the model dimension");
    if (u1.size() != x0.size() || u2.size() != x0.size())
        throw std::invalid_argument("boundary_slice: spanning directions must match x0");
    if (grid_n < 2) throw std::invalid_argument("boundary_slice: grid_n must be at least 2");
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw std::invalid_argument("boundary_slice: extent must be positive");

    Vec e1 = normalized(u1);
    Vec e2 = normalized(u2);
    double along = dot(e2, e1);
    for (std::size_t i = 0; i < e2.size(); ++i) e2[i] -= along * e1[i];
    double residual = norm(e2);
    if (residual < 1e-9)
        throw std::invalid_argument("boundary_slice: spanning directions are near-parallel");
    for (double& x : e2) x /= residual;

    SliceGrid grid;
    grid.n = grid_n;
    grid.extent = extent;
    grid.labels.resize(static_cast<std::size_t>(grid_n) * grid_n);
    double step = 2.0 * extent / (grid_n - 1);
    for (int i = 0; i < grid_n; ++i) {
        double a = -extent + step * i;
        for (int j = 0; j < grid_n; ++j) {
            double b = -extent + step * j;
            Vec x = x0;
            for (std::size_t k = 0; k < x.size(); ++k) x[k] += a * e1[k] + b * e2[k];
            grid.labels[static_cast<std::size_t>(i) * grid_n + j] = predict(model, x, ledger).value;
        }
    }
    return grid;
}

void write_trace_csv(const BoshResult& run, const std::string& path) {
    std::string out = "stage,config_id,origin,queries_cumulative,best_lambda\n";
    for (const TraceRecord& r : run.trace) {
        out += std::to_string(r.stage_index);
        out += ',';
        out += std::to_string(r.config_id);
        out += ',';
        out += origin_name(origin_of(run, r.config_id));
        out += ',';
        out += std::to_string(r.queries_cumulative);
        out += ',';
        out += fmt("%.17g", r.best_lambda);
        out += '\n';
    }
    write_file(path, out);
}

void write_curve_svg(const BoshResult& run, const std::string& path) {
    constexpr double kw = 800.0, kh = 500.0;
    constexpr double left = 60.0, right = 20.0, top = 20.0, bottom = 50.0;
    const double plot_w = kw - left - right;
    const double plot_h = kh - top - bottom;

    std::uint64_t qmax = 1;
    double lmax = 0.0;
    for (const TraceRecord& r : run.trace) {
        qmax = std::max(qmax, r.queries_cumulative);
        lmax = std::max(lmax, r.best_lambda);
    }
    if (!(lmax > 0.0)) lmax = 1.0;
    auto sx = [&](double q) { return left + plot_w * (q / static_cast<double>(qmax)); };
    auto sy = [&](double l) { return top + plot_h * (1.0 - l / lmax); };

    std::map<int, std::vector<const TraceRecord*>> by_config;
    for (const TraceRecord& r : run.trace) by_config[r.config_id].push_back(&r);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
           "viewBox=\"0 0 800 500\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
    // Axes with end labels.
    svg += "<line class=\"axis\" x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", kh - bottom) +
           "\" x2=\"" + fmt("%.2f", kw - right) + "\" y2=\"" + fmt("%.2f", kh - bottom) +
           "\" stroke=\"black\"/>\n";
    svg += "<line class=\"axis\" x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", top) +
           "\" x2=\"" + fmt("%.2f", left) + "\" y2=\"" + fmt("%.2f", kh - bottom) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", kw / 2) + "\" y=\"" + fmt("%.2f", kh - 12.0) +
           "\" text-anchor=\"middle\" font-size=\"14\">queries</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt("%.2f", kh / 2) + "\" text-anchor=\"middle\" "
           "font-size=\"14\" transform=\"rotate(-90 16 " + fmt("%.2f", kh / 2) +
           ")\">distortion</text>\n";
    svg += "<text x=\"" + fmt("%.2f", kw - right) + "\" y=\"" + fmt("%.2f", kh - 32.0) +
           "\" text-anchor=\"end\" font-size=\"12\">" + std::to_string(qmax) + "</text>\n";
    svg += "<text x=\"" + fmt("%.2f", left - 6.0) + "\" y=\"" + fmt("%.2f", top + 12.0) +
           "\" text-anchor=\"end\" font-size=\"12\">" + fmt("%.4g", lmax) + "</text>\n";

    // Stage boundaries.
    for (const StageStat& s : run.stage_log) {
        double x = sx(static_cast<double>(s.queries_at_end));
        svg += "<line class=\"stage-marker\" x1=\"" + fmt("%.2f", x) + "\" y1=\"" +
               fmt("%.2f", top) + "\" x2=\"" + fmt("%.2f", x) + "\" y2=\"" +
               fmt("%.2f", kh - bottom) + "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
    }

    // One polyline per configuration.
    for (const auto& [config_id, records] : by_config) {
        Origin origin = origin_of(run, config_id);
        const char* color = kPalette[static_cast<std::size_t>(config_id) % 8];
        svg += "<polyline class=\"cfg cfg-";
        svg += origin_name(origin);
        svg += "\" fill=\"none\" stroke=\"";
        svg += color;
        svg += origin == Origin::resampled ? "\" stroke-width=\"2\" stroke-dasharray=\"6 2\""
                                           : "\" stroke-width=\"1.5\"";
        svg += " points=\"";
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (i > 0) svg += ' ';
            svg += fmt("%.2f", sx(static_cast<double>(records[i]->queries_cumulative)));
            svg += ',';
            svg += fmt("%.2f", sy(records[i]->best_lambda));
        }
        svg += "\"/>\n";
    }
    svg += "</svg>\n";
    write_file(path, svg);
}

std::string summary_to_json(const MetricsSummary& m) {
    ordered_json j;
    j["avg_l2"] = m.avg_l2;
    j["asr"] = m.asr;
    j["epsilon"] = m.epsilon;
    j["total_queries"] = m.total_queries;
    if (m.query_ratio)
        j["query_ratio"] = *m.query_ratio;
    else
        j["query_ratio"] = nullptr;
    ordered_json per = ordered_json::array();
    for (const PerExample& e : m.per_example) {
        ordered_json je;
        je["lambda"] = e.lambda;
        je["queries"] = e.queries;
        per.push_back(std::move(je));
    }
    j["per_example"] = std::move(per);
    return j.dump(2) + "\n";
}

void write_summary_json(const MetricsSummary& metrics, const std::string& path) {
    write_file(path, summary_to_json(metrics));
}

void write_slice_csv(const SliceGrid& grid, const std::string& path) {
    std::string out;
    for (int i = 0; i < grid.n; ++i) {
        for (int j = 0; j < grid.n; ++j) {
            if (j > 0) out += ',';
            out += std::to_string(grid.at(i, j));
        }
        out += '\n';
    }
    write_file(path, out);
}

void emit_outputs(const ExperimentResult& result, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + out_dir + "'");
    for (std::size_t i = 0; i < result.examples.size(); ++i) {
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%03zu", i);
        const BoshResult& run = result.examples[i].run;
        write_trace_csv(run, out_dir + "/trace_" + idx + ".csv");
        write_curve_svg(run, out_dir + "/curve_" + idx + ".svg");
    }
    write_summary_json(result.metrics, out_dir + "/summary.json");
}

std::vector<Vec> load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("points file: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("points file: invalid JSON in '" + path + "': " + e.what());
    }
    if (!j.is_array() || j.empty())
        throw std::runtime_error("points file: top level must be a non-empty array");
    auto to_vec = [&](const nlohmann::json& a) {
        Vec v;
        v.reserve(a.size());
        for (const auto& x : a) {
            if (!x.is_number())
                throw std::runtime_error("points file: entries must be numbers");
            double d = x.get<double>();
            if (!std::isfinite(d)) throw std::runtime_error("points file: entries must be finite");
            v.push_back(d);
        }
        if (v.empty()) throw std::runtime_error("points file: vectors must be non-empty");
        return v;
    };
    std::vector<Vec> out;
    if (j.front().is_array())
        for (const auto& a : j) out.push_back(to_vec(a));
    else
        out.push_back(to_vec(j));
    return out;
}

Vec load_point(const std::string& path) {
    std::vector<Vec> pts = load_points(path);
    if (pts.size() != 1)
        throw std::runtime_error("points file: expected exactly one vector in '" + path + "'");
    return pts.front();
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    std::unique_ptr<VictimModel> model = load_model(spec.model_path);

    struct Example {
        Vec x0;
        Label y0;
    };
    std::vector<Example> examples;
    if (const auto* landscape = dynamic_cast<const SyntheticLandscape*>(model.get())) {
        examples.push_back(Example{landscape->reference_point(), Label{landscape->base_label()}});
    } else {
        if (spec.x0_path.empty())
            throw std::invalid_argument("this model type needs an x0 file");
        for (Vec& p : load_points(spec.x0_path)) {
            Label y0 = model->classify(p);
            examples.push_back(Example{std::move(p), y0});
        }
    }

    ExperimentResult result;
    std::vector<double> lambdas;
    std::vector<std::uint64_t> queries;
    for (std::size_t ex = 0; ex < examples.size(); ++ex) {
        QueryLedger ledger;
        AttackEnv env;
        env.model = model.get();
        env.x0 = examples[ex].x0;
        env.y0 = examples[ex].y0;
        env.ledger = &ledger;
        env.search = spec.search;
        std::uint64_t example_seed = mix_seed(spec.seed, 0x65780000ULL + ex);

        ExampleOutcome outcome;
        switch (spec.mode) {
            case AttackMode::single: {
                BoshResult run =
                    run_single_attack(spec.attacker, example_seed,
                                      spec.bosh.per_direction_query_budget, spec.bosh.init_mode, env);
                outcome.final_lambda = run.best.lambda;
                outcome.queries = run.total_queries;
                outcome.run = std::move(run);
                break;
            }
            case AttackMode::multi_init:
                outcome = attack_multi_init(spec.attacker, example_seed,
                                            spec.bosh.per_direction_query_budget,
                                            spec.bosh.init_mode, spec.n_inits, env);
                break;
            case AttackMode::bosh: {
                BoshConfig bc = spec.bosh;
                bc.seed = example_seed;
                BoshResult run = run_bosh(bc, spec.attacker, env);
                outcome.final_lambda = run.best.lambda;
                outcome.queries = run.total_queries;
                outcome.run = std::move(run);
                break;
            }
        }
        lambdas.push_back(outcome.final_lambda);
        queries.push_back(outcome.queries);
        result.examples.push_back(std::move(outcome));
    }
    result.metrics = compute_metrics(lambdas, queries, spec.epsilon, spec.baseline_queries);
    return result;
}

}  // namespace bosh
